#pragma once

#include <string>
#include <vector>

namespace rmlab {

/// Command-line entry point (also callable in-process from tests).
/// Subcommands: sample, doubling, exponent, chiper, semilocal, tce,
/// expshrink, porosity, carrot, classify, corpus.
int run_cli(const std::vector<std::string>& args);

}  // namespace rmlab
