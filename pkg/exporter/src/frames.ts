/**
 * Frame loading. A "video" here is a directory of decoded frames in
 * binary PNM (P6 color / P5 gray, 8-bit), sorted by filename; anything
 * (ffmpeg, ImageMagick) can produce these from real footage:
 *   ffmpeg -i clip.mp4 frames/%05d.ppm
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

export interface Image {
  width: number
  height: number
  /** RGB interleaved, 3 bytes per pixel */
  data: Uint8Array
}

export function listFrameFiles(dir: string): string[] {
  let entries: string[]
  try {
    entries = fs.readdirSync(dir)
  } catch (err) {
    throw new Error(`cannot read frame directory ${dir}: ${(err as Error).message}`)
  }
  return entries
    .filter((f) => /\.(ppm|pgm)$/i.test(f))
    .sort()
    .map((f) => path.join(dir, f))
}

function parseHeader(buf: Buffer): { magic: string; width: number; height: number; maxval: number; offset: number } {
  let pos = 0
  const token = (): string => {
    // skip whitespace and '#' comments
    for (;;) {
      while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++
      if (pos < buf.length && buf[pos] === 0x23) {
        while (pos < buf.length && buf[pos] !== 0x0a) pos++
      } else {
        break
      }
    }
    const start = pos
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++
    return buf.toString('ascii', start, pos)
  }
  const magic = token()
  const width = parseInt(token(), 10)
  const height = parseInt(token(), 10)
  const maxval = parseInt(token(), 10)
  pos++ // single whitespace after maxval
  if (!Number.isFinite(width) || !Number.isFinite(height) || width <= 0 || height <= 0) {
    throw new Error(`bad PNM dimensions ${width}x${height}`)
  }
  if (maxval !== 255) {
    throw new Error(`only 8-bit PNM supported, got maxval ${maxval}`)
  }
  return { magic, width, height, maxval, offset: pos }
}

export function loadPnm(file: string): Image {
  const buf = fs.readFileSync(file)
  const { magic, width, height, offset } = parseHeader(buf)
  const pixels = width * height
  if (magic === 'P6') {
    if (buf.length < offset + pixels * 3) throw new Error(`${file}: truncated P6 payload`)
    return { width, height, data: new Uint8Array(buf.subarray(offset, offset + pixels * 3)) }
  }
  if (magic === 'P5') {
    if (buf.length < offset + pixels) throw new Error(`${file}: truncated P5 payload`)
    const rgb = new Uint8Array(pixels * 3)
    for (let i = 0; i < pixels; i++) {
      const v = buf[offset + i]
      rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v
    }
    return { width, height, data: rgb }
  }
  throw new Error(`${file}: unsupported PNM magic ${magic}`)
}

/** Test helper: encode an RGB image as binary PPM. */
export function encodePpm(img: Image): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(img.data)])
}
