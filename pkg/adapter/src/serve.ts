import * as readline from 'readline'
import { Writable } from 'stream'
import { decodePng, detectBright, Detection } from './heuristic'

export const PROTOCOL = 'spx/1'

export type AdapterConfig = {
  /** model identifier; anything other than a loadable backend falls
   *  back to the brightness heuristic */
  model: string
  /** score threshold in [0, 1] applied to the brightness cut */
  threshold: number
}

export const defaultConfig: AdapterConfig = { model: 'heuristic', threshold: 0 }

/** Handle one request line; always returns a JSON-serializable reply. */
export function handleLine(line: string, config: AdapterConfig): object {
  let request: any
  try {
    request = JSON.parse(line)
  } catch {
    return { id: null, error: 'malformed request: not valid JSON' }
  }
  const id = typeof request?.id === 'number' ? request.id : null
  if (id === null || typeof request.image_png_b64 !== 'string') {
    return { id, error: 'malformed request: need numeric id and image_png_b64' }
  }
  let detections: Detection[]
  try {
    detections = detectBright(decodePng(request.image_png_b64), config.threshold)
  } catch (err) {
    return { id, error: `undecodable image: ${err}` }
  }
  return { id, detections }
}

/** Run the spx/1 loop: handshake first, then one reply per request line. */
export function serve(
  config: AdapterConfig,
  input: NodeJS.ReadableStream,
  output: Writable,
): Promise<void> {
  output.write(JSON.stringify({ protocol: PROTOCOL }) + '\n')
  const rl = readline.createInterface({ input, terminal: false })
  rl.on('line', line => {
    if (line.trim() === '') return
    output.write(JSON.stringify(handleLine(line, config)) + '\n')
  })
  return new Promise(resolve => rl.on('close', () => resolve()))
}
