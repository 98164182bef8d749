import { defaultConfig, serve } from './serve'

function parseArgs(argv: string[]) {
  const config = { ...defaultConfig }
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === '--model') config.model = argv[++i]
    else if (argv[i] === '--threshold') config.threshold = Number(argv[++i])
    else {
      process.stderr.write(`unknown flag: ${argv[i]}\n`)
      process.exit(1)
    }
  }
  if (!(config.threshold >= 0 && config.threshold <= 1)) {
    process.stderr.write('--threshold must be in [0, 1]\n')
    process.exit(1)
  }
  return config
}

const config = parseArgs(process.argv.slice(2))
if (config.model !== 'heuristic') {
  // No model backend is bundled; any other id falls back to the heuristic.
  process.stderr.write(`model "${config.model}" unavailable; using heuristic\n`)
  config.model = 'heuristic'
}
serve(config, process.stdin, process.stdout)
