#include "paysim/event_log.hpp"

namespace paysim {

void EventLog::emit(SimTime at, std::string_view app, std::string_view event, const nlohmann::ordered_json& fields) {
    nlohmann::ordered_json line;
    line["t_ms"] = at.ms();
    line["app"] = app;
    line["event"] = event;
    for (const auto& [key, value] : fields.items()) line[key] = value;
    lines_.push_back(line.dump());
}

std::string EventLog::text() const {
    std::string out;
    for (const auto& l : lines_) {
        out += l;
        out += '\n';
    }
    return out;
}

}  // namespace paysim
