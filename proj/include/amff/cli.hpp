#pragma once

// Command-line front end: synth, extract, train, eval, predict, ablate, gradcheck.

#include <ostream>

namespace amff::cli {

/// Parses and runs one command. Failures print "error: E_<CODE>: message" to
/// `err` and return a nonzero status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace amff::cli
