/**
 * Detector interface plus a self-contained analytic backend.
 *
 * Any model that yields a global feature map, candidate boxes, and
 * per-box embeddings can implement Detector; the analytic backend keeps
 * the exporter usable offline: foreground blobs against the dominant
 * background color become ROIs, and features are fixed seeded
 * projections of pooled color/texture statistics. Upright blobs
 * (taller than wide) are labeled as the person class.
 */

import type { Image } from './frames.js'
import type { StreamDims } from './mapf.js'

export const PERSON_CLASS_ID = 1
export const OBJECT_CLASS_ID = 2

export interface Detection {
  box: [number, number, number, number]
  score: number
  classId: number
  features: Float32Array
}

export interface DetectorOutput {
  globalMap: Float32Array
  detections: Detection[]
}

export interface Detector {
  dims: StreamDims
  detect(img: Image): DetectorOutput
}

/** Deterministic PRNG for the fixed projection matrices. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a += 0x6d2b79f5
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function projectionMatrix(rows: number, cols: number, seed: number): Float32Array {
  const rand = mulberry32(seed)
  const m = new Float32Array(rows * cols)
  for (let i = 0; i < m.length; i++) {
    // sum of uniforms, roughly centered gaussian
    m[i] = (rand() + rand() + rand() - 1.5) / Math.sqrt(rows)
  }
  return m
}

const CELL_STATS = 6 // mean R,G,B, luma variance, |dx|, |dy|

interface AnalyticOptions {
  gridH?: number
  gridW?: number
  channels?: number
  featureDim?: number
  /** L1 RGB distance from the background color that marks foreground */
  foregroundThreshold?: number
  /** smallest accepted blob, as a fraction of the image area */
  minBlobFraction?: number
}

export class AnalyticDetector implements Detector {
  readonly dims: StreamDims
  private readonly mapProj: Float32Array
  private readonly roiProj: Float32Array
  private readonly threshold: number
  private readonly minBlobFraction: number

  constructor(opts: AnalyticOptions = {}) {
    const h = opts.gridH ?? 8
    const w = opts.gridW ?? 8
    const c = opts.channels ?? 32
    const d = opts.featureDim ?? 64
    if (c <= CELL_STATS) throw new Error(`need more than ${CELL_STATS} channels, got ${c}`)
    this.dims = { c, h, w, d }
    this.mapProj = projectionMatrix(CELL_STATS, c - CELL_STATS, 11)
    this.roiProj = projectionMatrix(CELL_STATS + 4, d, 13)
    this.threshold = opts.foregroundThreshold ?? 60
    this.minBlobFraction = opts.minBlobFraction ?? 0.0005
  }

  detect(img: Image): DetectorOutput {
    const stats = cellStatistics(img, this.dims.h, this.dims.w)
    const globalMap = this.buildGlobalMap(stats)
    const detections = this.proposeRois(img, stats)
    return { globalMap, detections }
  }

  private buildGlobalMap(stats: Float32Array): Float32Array {
    const { c, h, w } = this.dims
    const cells = h * w
    const out = new Float32Array(c * cells)
    for (let cell = 0; cell < cells; cell++) {
      for (let s = 0; s < CELL_STATS; s++) {
        out[s * cells + cell] = stats[cell * CELL_STATS + s]
      }
      for (let k = 0; k < c - CELL_STATS; k++) {
        let acc = 0
        for (let s = 0; s < CELL_STATS; s++) {
          acc += stats[cell * CELL_STATS + s] * this.mapProj[s * (c - CELL_STATS) + k]
        }
        out[(CELL_STATS + k) * cells + cell] = acc
      }
    }
    return out
  }

  private proposeRois(img: Image, stats: Float32Array): Detection[] {
    const { width, height, data } = img
    const bg = backgroundColor(img)
    const mask = new Uint8Array(width * height)
    for (let i = 0; i < width * height; i++) {
      const dr = Math.abs(data[3 * i] - bg[0])
      const dg = Math.abs(data[3 * i + 1] - bg[1])
      const db = Math.abs(data[3 * i + 2] - bg[2])
      mask[i] = dr + dg + db > this.threshold ? 1 : 0
    }
    const blobs = connectedComponents(mask, width, height)
    const minPixels = Math.max(4, this.minBlobFraction * width * height)
    const detections: Detection[] = []
    for (const blob of blobs) {
      if (blob.size < minPixels) continue
      const bw = blob.x2 - blob.x1 + 1
      const bh = blob.y2 - blob.y1 + 1
      const box: [number, number, number, number] = [
        blob.x1 / width,
        blob.y1 / height,
        (blob.x2 + 1) / width,
        (blob.y2 + 1) / height,
      ]
      const density = blob.size / (bw * bh)
      const classId = bh >= bw ? PERSON_CLASS_ID : OBJECT_CLASS_ID
      detections.push({
        box,
        score: Math.min(1, density),
        classId,
        features: this.roiFeatures(box, stats),
      })
    }
    detections.sort((a, b) => b.score - a.score || a.box[0] - b.box[0])
    return detections
  }

  private roiFeatures(box: [number, number, number, number], stats: Float32Array): Float32Array {
    const { h, w, d } = this.dims
    const pooled = new Float32Array(CELL_STATS + 4)
    let count = 0
    for (let i = 0; i < h; i++) {
      const cy = (i + 0.5) / h
      if (cy < box[1] || cy > box[3]) continue
      for (let j = 0; j < w; j++) {
        const cx = (j + 0.5) / w
        if (cx < box[0] || cx > box[2]) continue
        for (let s = 0; s < CELL_STATS; s++) pooled[s] += stats[(i * w + j) * CELL_STATS + s]
        count++
      }
    }
    if (count > 0) {
      for (let s = 0; s < CELL_STATS; s++) pooled[s] /= count
    }
    pooled[CELL_STATS] = box[2] - box[0]
    pooled[CELL_STATS + 1] = box[3] - box[1]
    pooled[CELL_STATS + 2] = (box[0] + box[2]) / 2
    pooled[CELL_STATS + 3] = (box[1] + box[3]) / 2
    const out = new Float32Array(d)
    for (let k = 0; k < d; k++) {
      let acc = 0
      for (let s = 0; s < pooled.length; s++) acc += pooled[s] * this.roiProj[s * d + k]
      out[k] = acc
    }
    return out
  }
}

/** Per-cell statistics on the grid: mean RGB, luma variance, gradient energy. */
function cellStatistics(img: Image, gridH: number, gridW: number): Float32Array {
  const { width, height, data } = img
  const stats = new Float32Array(gridH * gridW * CELL_STATS)
  for (let gi = 0; gi < gridH; gi++) {
    for (let gj = 0; gj < gridW; gj++) {
      const y1 = Math.floor((gi * height) / gridH)
      const y2 = Math.max(y1 + 1, Math.floor(((gi + 1) * height) / gridH))
      const x1 = Math.floor((gj * width) / gridW)
      const x2 = Math.max(x1 + 1, Math.floor(((gj + 1) * width) / gridW))
      let r = 0
      let g = 0
      let b = 0
      let luma = 0
      let luma2 = 0
      let dx = 0
      let dy = 0
      let n = 0
      for (let y = y1; y < y2; y++) {
        for (let x = x1; x < x2; x++) {
          const i = y * width + x
          const pr = data[3 * i]
          const pg = data[3 * i + 1]
          const pb = data[3 * i + 2]
          const l = 0.299 * pr + 0.587 * pg + 0.114 * pb
          r += pr
          g += pg
          b += pb
          luma += l
          luma2 += l * l
          if (x + 1 < width) {
            const j = y * width + x + 1
            dx += Math.abs(0.299 * data[3 * j] + 0.587 * data[3 * j + 1] + 0.114 * data[3 * j + 2] - l)
          }
          if (y + 1 < height) {
            const j = (y + 1) * width + x
            dy += Math.abs(0.299 * data[3 * j] + 0.587 * data[3 * j + 1] + 0.114 * data[3 * j + 2] - l)
          }
          n++
        }
      }
      const base = (gi * gridW + gj) * CELL_STATS
      const meanLuma = luma / n
      stats[base] = r / n / 255
      stats[base + 1] = g / n / 255
      stats[base + 2] = b / n / 255
      stats[base + 3] = Math.sqrt(Math.max(0, luma2 / n - meanLuma * meanLuma)) / 255
      stats[base + 4] = dx / n / 255
      stats[base + 5] = dy / n / 255
    }
  }
  return stats
}

/** Dominant background color: median of a coarse pixel subsample. */
function backgroundColor(img: Image): [number, number, number] {
  const { width, height, data } = img
  const step = Math.max(1, Math.floor(Math.sqrt((width * height) / 1024)))
  const rs: number[] = []
  const gs: number[] = []
  const bs: number[] = []
  for (let y = 0; y < height; y += step) {
    for (let x = 0; x < width; x += step) {
      const i = y * width + x
      rs.push(data[3 * i])
      gs.push(data[3 * i + 1])
      bs.push(data[3 * i + 2])
    }
  }
  const median = (arr: number[]) => {
    const s = [...arr].sort((a, b) => a - b)
    return s[Math.floor(s.length / 2)]
  }
  return [median(rs), median(gs), median(bs)]
}

interface Blob {
  x1: number
  y1: number
  x2: number
  y2: number
  size: number
}

function connectedComponents(mask: Uint8Array, width: number, height: number): Blob[] {
  const seen = new Uint8Array(mask.length)
  const blobs: Blob[] = []
  const stack: number[] = []
  for (let start = 0; start < mask.length; start++) {
    if (!mask[start] || seen[start]) continue
    let x1 = width
    let y1 = height
    let x2 = 0
    let y2 = 0
    let size = 0
    stack.push(start)
    seen[start] = 1
    while (stack.length) {
      const i = stack.pop()!
      const x = i % width
      const y = (i - x) / width
      size++
      if (x < x1) x1 = x
      if (y < y1) y1 = y
      if (x > x2) x2 = x
      if (y > y2) y2 = y
      if (x > 0 && mask[i - 1] && !seen[i - 1]) (seen[i - 1] = 1), stack.push(i - 1)
      if (x + 1 < width && mask[i + 1] && !seen[i + 1]) (seen[i + 1] = 1), stack.push(i + 1)
      if (y > 0 && mask[i - width] && !seen[i - width]) (seen[i - width] = 1), stack.push(i - width)
      if (y + 1 < height && mask[i + width] && !seen[i + width]) (seen[i + width] = 1), stack.push(i + width)
    }
    blobs.push({ x1, y1, x2, y2, size })
  }
  return blobs
}
