#include "bimshare/simnet.hpp"

#include "bimshare/errors.hpp"

#include <vector>

namespace bimshare {

SimNet::SimNet() : SimNet(Options{}) {}
SimNet::SimNet(Options opt) : opt_(opt), rng_(opt.seed) {}

void SimNet::attach(const std::string& name, Handler handler) {
    handlers_[name] = std::move(handler);
}

void SimNet::send(const std::string& from, const std::string& to, Message msg) {
    if (!handlers_.count(to)) throw NotFoundError("no such endpoint: " + to);
    if (opt_.drop_rate > 0.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < opt_.drop_rate) {
        ++dropped_;
        return;
    }
    auto& q = queues_[{from, to}];
    q.push_back(msg);
    if (opt_.dup_rate > 0.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < opt_.dup_rate)
        q.push_back(std::move(msg));
}

std::size_t SimNet::deliver(std::size_t steps) {
    std::size_t delivered = 0;
    while (delivered < steps) {
        std::vector<std::map<PairKey, std::deque<Message>>::iterator> ready;
        for (auto it = queues_.begin(); it != queues_.end(); ++it)
            if (!it->second.empty()) ready.push_back(it);
        if (ready.empty()) break;

        std::size_t pick;
        if (opt_.order == Order::Random)
            pick = std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng_);
        else
            pick = rr_cursor_++ % ready.size();

        auto it = ready[pick];
        Message msg = std::move(it->second.front());
        it->second.pop_front();
        const std::string from = it->first.first;
        const std::string to = it->first.second;
        ++clock_;
        ++delivered;
        handlers_.at(to)(from, std::move(msg)); // may enqueue further sends
    }
    return delivered;
}

std::size_t SimNet::deliver_all() {
    std::size_t total = 0;
    while (!idle()) total += deliver();
    return total;
}

bool SimNet::idle() const { return pending() == 0; }

std::size_t SimNet::pending() const {
    std::size_t n = 0;
    for (const auto& [key, q] : queues_) n += q.size();
    return n;
}

} // namespace bimshare
