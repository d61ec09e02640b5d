#pragma once

#include "bimshare/wire.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>

namespace bimshare {

// Deterministic in-process message network for the asynchronous data plane.
// Each (sender, receiver) pair gets its own FIFO queue, so per-pair ordering
// always holds; the scheduler picks which non-empty queue delivers next
// either round-robin ("fifo") or via a seeded RNG ("random"). Optional drop
// and duplicate injection exercise retry/idempotence paths.
class SimNet {
public:
    enum class Order { Fifo, Random };
    struct Options {
        Order order = Order::Fifo;
        std::uint64_t seed = 1;
        double drop_rate = 0.0; // chance a sent message never arrives
        double dup_rate = 0.0;  // chance a sent message arrives twice
    };

    using Handler = std::function<void(const std::string& from, Message&&)>;

    SimNet();
    explicit SimNet(Options opt);

    void attach(const std::string& name, Handler handler);
    void send(const std::string& from, const std::string& to, Message msg);

    // Delivers up to `steps` pending messages; returns how many were
    // actually handed to receivers.
    std::size_t deliver(std::size_t steps = SIZE_MAX);
    // Runs until every queue is empty (including messages sent by handlers).
    std::size_t deliver_all();

    bool idle() const;
    std::size_t pending() const;
    std::uint64_t clock() const { return clock_; } // messages delivered so far
    std::size_t dropped() const { return dropped_; }

private:
    using PairKey = std::pair<std::string, std::string>;

    Options opt_;
    std::mt19937_64 rng_;
    std::map<std::string, Handler> handlers_;
    std::map<PairKey, std::deque<Message>> queues_;
    std::uint64_t clock_ = 0;
    std::size_t dropped_ = 0;
    std::size_t rr_cursor_ = 0;
};

} // namespace bimshare
