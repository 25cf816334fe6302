/**
 * Export orchestration: frame directories in, one MAPF stream per video
 * out. Training mode keeps every detection class-agnostically; inference
 * mode (humanOnly) keeps only the person class.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

import { AnalyticDetector, Detector, PERSON_CLASS_ID } from './detector.js'
import { listFrameFiles, loadPnm } from './frames.js'
import { encodeStream, FrameRecord } from './mapf.js'

export interface ExportOptions {
  stride?: number
  humanOnly?: boolean
  detector?: Detector
}

export interface ExportResult {
  frames: number
  rois: number
  outPath: string
}

export function exportVideo(frameDir: string, outPath: string, opts: ExportOptions = {}): ExportResult {
  const stride = opts.stride ?? 1
  if (!Number.isInteger(stride) || stride < 1) {
    throw new Error(`stride must be a positive integer, got ${stride}`)
  }
  const detector = opts.detector ?? new AnalyticDetector()
  const files = listFrameFiles(frameDir)
  if (files.length === 0) {
    throw new Error(`no decodable frames (*.ppm / *.pgm) in ${frameDir}`)
  }
  const frames: FrameRecord[] = []
  let roiCount = 0
  for (let i = 0; i < files.length; i += stride) {
    const img = loadPnm(files[i])
    const { globalMap, detections } = detector.detect(img)
    const kept = opts.humanOnly ? detections.filter((d) => d.classId === PERSON_CLASS_ID) : detections
    roiCount += kept.length
    frames.push({
      frameIndex: i,
      globalMap,
      rois: kept.map((d) => ({ box: d.box, score: d.score, classId: d.classId, features: d.features })),
    })
  }
  const buf = encodeStream(detector.dims, frames)
  fs.mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true })
  fs.writeFileSync(outPath, buf)
  return { frames: frames.length, rois: roiCount, outPath }
}

export function exportMany(frameDirs: string[], outDir: string, opts: ExportOptions = {}): ExportResult[] {
  fs.mkdirSync(outDir, { recursive: true })
  return frameDirs.map((dir) => {
    const name = path.basename(path.resolve(dir)) + '.mapf'
    return exportVideo(dir, path.join(outDir, name), opts)
  })
}
