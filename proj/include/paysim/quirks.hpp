#pragma once

#include <string>
#include <vector>

namespace paysim {

struct QuirkCheck {
    std::string id;      // "Q1", "Q2", "Q3"
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Built-in suite for the three operational constraints: the uptime gate,
/// SkyPort-before-E-port start order and stereo-requires-bulk. Fully
/// deterministic.
std::vector<QuirkCheck> run_quirk_suite();

}  // namespace paysim
