/**
 * MAPF feature-stream container, little-endian:
 *   magic "MAPF" | version u32 | C u32 | H u32 | W u32 | D u32
 *   per frame: frame_index u32 | global_map C*H*W f32 | n_rois u32
 *   per roi:   box 4*f32 (x1,y1,x2,y2 normalized) | score f32 | class u32 | features D*f32
 */

export const MAGIC = 'MAPF'
export const VERSION = 1

export interface StreamDims {
  c: number
  h: number
  w: number
  d: number
}

export interface Roi {
  box: [number, number, number, number]
  score: number
  classId: number
  features: Float32Array
}

export interface FrameRecord {
  frameIndex: number
  globalMap: Float32Array // length c*h*w
  rois: Roi[]
}

function checkFinite(values: ArrayLike<number>, what: string) {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite float in ${what} at index ${i}`)
    }
  }
}

export function encodeStream(dims: StreamDims, frames: FrameRecord[]): Buffer {
  const mapLen = dims.c * dims.h * dims.w
  let size = 4 + 5 * 4
  for (const f of frames) {
    size += 4 + 4 * mapLen + 4 + f.rois.length * (4 * 4 + 4 + 4 + 4 * dims.d)
  }
  const buf = Buffer.alloc(size)
  let off = 0
  buf.write(MAGIC, off, 'ascii')
  off += 4
  for (const v of [VERSION, dims.c, dims.h, dims.w, dims.d]) {
    buf.writeUInt32LE(v, off)
    off += 4
  }
  let prevIndex = -1
  for (const f of frames) {
    if (f.frameIndex <= prevIndex) {
      throw new Error(`frame indices must ascend: ${f.frameIndex} after ${prevIndex}`)
    }
    prevIndex = f.frameIndex
    if (f.globalMap.length !== mapLen) {
      throw new Error(`global map has ${f.globalMap.length} floats, expected ${mapLen}`)
    }
    checkFinite(f.globalMap, 'global map')
    buf.writeUInt32LE(f.frameIndex, off)
    off += 4
    for (let i = 0; i < mapLen; i++) {
      buf.writeFloatLE(f.globalMap[i], off)
      off += 4
    }
    buf.writeUInt32LE(f.rois.length, off)
    off += 4
    for (const roi of f.rois) {
      if (roi.features.length !== dims.d) {
        throw new Error(`roi has ${roi.features.length} features, header says ${dims.d}`)
      }
      checkFinite(roi.box, 'roi box')
      checkFinite(roi.features, 'roi features')
      for (const v of roi.box) {
        buf.writeFloatLE(v, off)
        off += 4
      }
      buf.writeFloatLE(roi.score, off)
      off += 4
      buf.writeUInt32LE(roi.classId, off)
      off += 4
      for (let i = 0; i < dims.d; i++) {
        buf.writeFloatLE(roi.features[i], off)
        off += 4
      }
    }
  }
  return buf
}

/** Reader for validation and tests; mirrors the writer exactly. */
export function decodeStream(buf: Buffer): { dims: StreamDims; frames: FrameRecord[] } {
  let off = 0
  const need = (n: number, what: string) => {
    if (off + n > buf.length) throw new Error(`truncated ${what} at byte offset ${off}`)
  }
  need(4, 'magic')
  if (buf.toString('ascii', 0, 4) !== MAGIC) throw new Error('bad magic')
  off = 4
  const u32 = (what: string) => {
    need(4, what)
    const v = buf.readUInt32LE(off)
    off += 4
    return v
  }
  const version = u32('version')
  if (version !== VERSION) throw new Error(`unsupported version ${version}`)
  const dims = { c: u32('C'), h: u32('H'), w: u32('W'), d: u32('D') }
  const mapLen = dims.c * dims.h * dims.w
  const frames: FrameRecord[] = []
  while (off < buf.length) {
    const frameIndex = u32('frame index')
    need(4 * mapLen, 'global map')
    const globalMap = new Float32Array(mapLen)
    for (let i = 0; i < mapLen; i++) {
      globalMap[i] = buf.readFloatLE(off)
      off += 4
    }
    const nRois = u32('roi count')
    const rois: Roi[] = []
    for (let r = 0; r < nRois; r++) {
      need(4 * 4 + 4 + 4 + 4 * dims.d, 'roi record')
      const box = [0, 0, 0, 0] as [number, number, number, number]
      for (let i = 0; i < 4; i++) {
        box[i] = buf.readFloatLE(off)
        off += 4
      }
      const score = buf.readFloatLE(off)
      off += 4
      const classId = buf.readUInt32LE(off)
      off += 4
      const features = new Float32Array(dims.d)
      for (let i = 0; i < dims.d; i++) {
        features[i] = buf.readFloatLE(off)
        off += 4
      }
      rois.push({ box, score, classId, features })
    }
    frames.push({ frameIndex, globalMap, rois })
  }
  return { dims, frames }
}
