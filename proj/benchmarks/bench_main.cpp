#include <benchmark/benchmark.h>

// the packaged benchmark_main archive is LTO bytecode from another gcc
BENCHMARK_MAIN();
