#pragma once

#include <string>

namespace paysim {

/// Conformance vectors shared with controller clients: packet multisets in
/// wire form (hex) with the result the reference reassembler produces, plus
/// click mapping samples. Deterministic.
std::string conformance_vectors_json();

}  // namespace paysim
