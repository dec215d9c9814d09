#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "paysim/sim_time.hpp"

namespace paysim {

/// Newline-delimited JSON event log: one object per line with fixed leading
/// keys t_ms, app, event followed by event-specific fields.
class EventLog {
public:
    void emit(SimTime at, std::string_view app, std::string_view event,
              const nlohmann::ordered_json& fields = nlohmann::ordered_json::object());

    const std::vector<std::string>& lines() const { return lines_; }
    std::string text() const;

private:
    std::vector<std::string> lines_;
};

}  // namespace paysim
