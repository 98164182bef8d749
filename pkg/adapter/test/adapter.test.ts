import { PassThrough } from 'stream'
import { PNG } from 'pngjs'
import { describe, expect, it } from 'vitest'
import { detectBright } from '../src/heuristic'
import { defaultConfig, handleLine, PROTOCOL, serve } from '../src/serve'

function makePng(
  width: number,
  height: number,
  paint: (x: number, y: number) => number,
): PNG {
  const png = new PNG({ width, height })
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const v = paint(x, y)
      const i = (y * width + x) * 4
      png.data[i] = png.data[i + 1] = png.data[i + 2] = v
      png.data[i + 3] = 255
    }
  }
  return png
}

function toB64(png: PNG): string {
  return PNG.sync.write(png).toString('base64')
}

async function runSession(lines: string[]): Promise<string[]> {
  const input = new PassThrough()
  const output = new PassThrough()
  const done = serve(defaultConfig, input, output)
  for (const line of lines) input.write(line + '\n')
  input.end()
  await done
  return output.read().toString().trim().split('\n')
}

describe('handshake', () => {
  it('emits the protocol line first', async () => {
    const out = await runSession([])
    expect(JSON.parse(out[0])).toEqual({ protocol: PROTOCOL })
  })
})

describe('request loop', () => {
  it('echoes ids in order over 100 randomized requests', async () => {
    const ids: number[] = []
    const lines: string[] = []
    for (let k = 0; k < 100; k++) {
      const id = Math.floor(Math.random() * 2 ** 31)
      const w = 2 + Math.floor(Math.random() * 15)
      const h = 2 + Math.floor(Math.random() * 15)
      const png = makePng(w, h, () => Math.floor(Math.random() * 256))
      ids.push(id)
      lines.push(JSON.stringify({ id, image_png_b64: toB64(png) }))
    }
    const out = await runSession(lines)
    expect(out.length).toBe(101)
    out.slice(1).forEach((line, k) => {
      const reply = JSON.parse(line)
      expect(reply.id).toBe(ids[k])
      expect(Array.isArray(reply.detections)).toBe(true)
    })
  })

  it('answers malformed requests with an error and keeps going', async () => {
    const png = makePng(4, 4, () => 0)
    const out = await runSession([
      'not json at all',
      JSON.stringify({ id: 7 }), // missing image
      JSON.stringify({ id: 8, image_png_b64: toB64(png) }),
    ])
    expect(JSON.parse(out[1]).error).toBeDefined()
    expect(JSON.parse(out[2])).toMatchObject({ id: 7 })
    expect(JSON.parse(out[2]).error).toBeDefined()
    expect(JSON.parse(out[3])).toEqual({ id: 8, detections: [] })
  })

  it('reports undecodable image bytes without crashing', () => {
    const reply = handleLine(
      JSON.stringify({ id: 3, image_png_b64: 'AAAA' }),
      defaultConfig,
    ) as any
    expect(reply.id).toBe(3)
    expect(reply.error).toContain('undecodable')
  })
})

describe('brightness heuristic', () => {
  it('black image yields no detections', () => {
    expect(detectBright(makePng(8, 8, () => 0))).toEqual([])
  })

  it('white square on black field: bbox within 1 px, score near 1', () => {
    const png = makePng(40, 40, (x, y) =>
      x >= 10 && x < 25 && y >= 5 && y < 30 ? 255 : 0,
    )
    const [det] = detectBright(png)
    const expected = [10, 5, 25, 30]
    det.bbox.forEach((v, k) => expect(Math.abs(v - expected[k])).toBeLessThanOrEqual(1))
    expect(det.score).toBeCloseTo(1, 5)
    expect(det.label).toBe('pedestrian')
  })

  it('is deterministic', () => {
    const png = makePng(16, 16, (x, y) => (x * 37 + y * 11) % 256)
    expect(detectBright(png)).toEqual(detectBright(png))
  })
})
