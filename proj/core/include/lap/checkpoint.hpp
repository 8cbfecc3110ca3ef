#pragma once

#include <iosfwd>
#include <string>

#include "lap/model.hpp"

namespace lap {

// Single-file model container: an 8-byte magic, a length-prefixed JSON header
// (config and vocabulary), then one length-prefixed block of raw
// little-endian 64-bit floats per parameter tensor, in declaration order.
void save_checkpoint(std::ostream& out, ParserModel& model);
void save_checkpoint(const std::string& path, ParserModel& model);

ParserModel load_checkpoint(std::istream& in, const std::string& source);
ParserModel load_checkpoint(const std::string& path);

}  // namespace lap
