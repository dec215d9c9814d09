#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace paysim {

/// Point on the simulated timeline, in milliseconds since simulation start.
class SimTime {
public:
    constexpr SimTime() = default;

    static constexpr SimTime from_ms(double ms) { return SimTime(ms); }
    static constexpr SimTime from_s(double s) { return SimTime(s * 1000.0); }

    constexpr double ms() const { return ms_; }
    constexpr double seconds() const { return ms_ / 1000.0; }

    constexpr SimTime operator+(double delta_ms) const { return SimTime(ms_ + delta_ms); }
    constexpr double operator-(SimTime other) const { return ms_ - other.ms_; }

    constexpr auto operator<=>(const SimTime&) const = default;

private:
    constexpr explicit SimTime(double ms) : ms_(ms) {}
    double ms_ = 0.0;
};

/// Monotone simulated clock. Nothing in the simulator reads wall time.
class SimClock {
public:
    SimTime now() const { return now_; }
    void advance_to(SimTime t);

private:
    SimTime now_;
};

/// Discrete-event queue. Events at equal times run in scheduling order.
class Scheduler {
public:
    using Action = std::function<void()>;

    explicit Scheduler(SimClock& clock) : clock_(clock) {}

    void at(SimTime t, Action action);
    bool empty() const { return queue_.empty(); }
    SimTime next_time() const;

    /// Runs every event with time <= t, then moves the clock to t.
    void run_until(SimTime t);

    SimClock& clock() { return clock_; }

private:
    struct Entry {
        SimTime time;
        std::uint64_t order;
        Action action;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.order > b.order;
        }
    };

    SimClock& clock_;
    std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
    std::uint64_t next_order_ = 0;
};

/// SplitMix64 step, used to derive independent stream seeds from one seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace paysim
