#pragma once

#include <string>
#include <vector>

namespace skelgroup {

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

std::vector<std::string> split(const std::string& text, char sep);

}  // namespace skelgroup
