#include "paysim/sim_time.hpp"

#include "paysim/error.hpp"

namespace paysim {

void SimClock::advance_to(SimTime t) {
    if (t < now_) {
        throw Error(ErrorCode::InvalidArgument, "simulated clock cannot move backwards");
    }
    now_ = t;
}

void Scheduler::at(SimTime t, Action action) {
    if (t < clock_.now()) t = clock_.now();
    queue_.push(Entry{t, next_order_++, std::move(action)});
}

SimTime Scheduler::next_time() const {
    if (queue_.empty()) throw Error(ErrorCode::InvalidArgument, "scheduler is empty");
    return queue_.top().time;
}

void Scheduler::run_until(SimTime t) {
    while (!queue_.empty() && queue_.top().time <= t) {
        Entry entry = queue_.top();
        queue_.pop();
        clock_.advance_to(entry.time);
        entry.action();
    }
    if (clock_.now() < t) clock_.advance_to(t);
}

}  // namespace paysim
