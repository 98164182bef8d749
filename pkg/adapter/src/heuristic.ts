import { PNG } from 'pngjs'

export type Detection = {
  bbox: [number, number, number, number]
  score: number
  label: string
}

/** Rec.601 luma of one RGBA pixel. */
function luma(data: Buffer, idx: number): number {
  return 0.299 * data[idx] + 0.587 * data[idx + 1] + 0.114 * data[idx + 2]
}

/**
 * Brightness-threshold detector: the single detection is the bounding box
 * of all pixels brighter than the image mean (plus an optional extra
 * threshold), scored by the normalized mean brightness inside that box.
 * A uniformly dark image yields no detections.
 */
export function detectBright(png: PNG, threshold = 0): Detection[] {
  const { width, height, data } = png
  const n = width * height
  let total = 0
  for (let i = 0; i < n; i++) total += luma(data, i * 4)
  const mean = total / n
  const cut = Math.max(mean, threshold * 255)

  let x1 = width
  let y1 = height
  let x2 = -1
  let y2 = -1
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (luma(data, (y * width + x) * 4) > cut) {
        if (x < x1) x1 = x
        if (y < y1) y1 = y
        if (x > x2) x2 = x
        if (y > y2) y2 = y
      }
    }
  }
  if (x2 < 0) return []

  let interior = 0
  let count = 0
  for (let y = y1; y <= y2; y++) {
    for (let x = x1; x <= x2; x++) {
      interior += luma(data, (y * width + x) * 4)
      count++
    }
  }
  const score = Math.min(1, interior / count / 255)
  // half-open pixel box: [x1, y1, x2+1, y2+1]
  return [{ bbox: [x1, y1, x2 + 1, y2 + 1], score, label: 'pedestrian' }]
}

export function decodePng(b64: string): PNG {
  return PNG.sync.read(Buffer.from(b64, 'base64'))
}
