#include "simfuse/subset_mask.hpp"

#include <algorithm>

#include "simfuse/error.hpp"

namespace simfuse {

std::string mask_to_names(SubsetMask mask, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t m : mask.members()) {
    if (!out.empty()) {
      out += '+';
    }
    out += m < names.size() ? names[m] : "#" + std::to_string(m);
  }
  return out;
}

SubsetMask mask_from_names(const std::string& joined, const std::vector<std::string>& names) {
  SubsetMask mask;
  std::size_t start = 0;
  while (start <= joined.size()) {
    const std::size_t end = std::min(joined.find('+', start), joined.size());
    const std::string token = joined.substr(start, end - start);
    const auto it = std::find(names.begin(), names.end(), token);
    if (it == names.end()) {
      throw DataError("unknown representation '" + token + "'");
    }
    mask = mask.with(static_cast<std::size_t>(it - names.begin()));
    start = end + 1;
  }
  return mask;
}

}  // namespace simfuse
