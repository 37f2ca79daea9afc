#pragma once

#include <iosfwd>
#include <string>

#include "gar/hierarchy.hpp"

namespace gar {

// Versioned text checkpoints. Reals are written with 17 significant digits,
// so a write/read round trip reproduces every double bit-exactly and reruns
// of the same experiment produce byte-identical files.

// Bare LSTM parameter block (dims line, then the eight weight matrices and
// four biases in a fixed order).
void write_lstm_params(std::ostream& out, const LstmParams& p);

// Full model: config, stage flags, and each component the variant owns.
void write_model(const TrainedModel& model, const std::string& path);
TrainedModel read_model(const std::string& path);

} // namespace gar
