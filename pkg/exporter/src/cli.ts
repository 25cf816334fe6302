#!/usr/bin/env node
/**
 * mapf-export <frame-dir>... --out DIR [--stride N] [--human-only]
 *
 * Each input directory (decoded PNM frames) becomes <dirname>.mapf in
 * the output directory. Exit 0 on success, 1 with a one-line diagnostic
 * otherwise.
 */

import { parseArgs } from 'node:util'

import { exportMany } from './export.js'

export function main(argv: string[]): number {
  let parsed
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        out: { type: 'string' },
        stride: { type: 'string', default: '1' },
        'human-only': { type: 'boolean', default: false },
      },
    })
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
  const { values, positionals } = parsed
  if (!values.out || positionals.length === 0) {
    console.error('usage: mapf-export <frame-dir>... --out DIR [--stride N] [--human-only]')
    return 1
  }
  try {
    const results = exportMany(positionals, values.out, {
      stride: parseInt(values.stride as string, 10),
      humanOnly: values['human-only'] as boolean,
    })
    for (const r of results) {
      console.log(`${r.outPath}: ${r.frames} frames, ${r.rois} rois`)
    }
    return 0
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!)
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)))
}
