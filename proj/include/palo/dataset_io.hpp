#pragma once

#include <string>

#include "palo/types.hpp"

namespace palo {

inline constexpr int kDatasetFormatVersion = 1;

// Line-delimited JSON: a header record followed by one trajectory per line.
// save/load round-trip is bit-exact for doubles. Malformed input raises
// DataError naming the 1-based line.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string dataset_to_string(const Dataset& d);
Dataset dataset_from_string(const std::string& text);

}  // namespace palo
