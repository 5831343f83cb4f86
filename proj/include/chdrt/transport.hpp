#ifndef CHDRT_TRANSPORT_HPP_
#define CHDRT_TRANSPORT_HPP_

#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "chdrt/util.hpp"

namespace chdrt {

/// Simulation time base. One tick is one sample period; all entities of a
/// scenario share a single clock instance.
struct VirtualClock {
    uint64_t now = 0;
    double sample_rate = 100e6;

    double tick_us() const { return 1e6 / sample_rate; }
    double to_us(uint64_t ticks) const { return static_cast<double>(ticks) * tick_us(); }
};

struct SimNetConfig {
    uint64_t latency = 0;          // ticks
    uint64_t jitter_max = 0;       // extra ticks, uniform in [0, jitter_max]
    uint64_t seed = 1;
    std::set<uint64_t> drop_plan;  // 0-based send ordinals that are never delivered
    bool reorder = false;          // allow jitter to reorder deliveries
};

/// One-directional packet pipe with a non-blocking poll interface. Both
/// backends follow the same contract: send never blocks or fails, poll
/// returns at most one packet and never blocks.
class Link {
public:
    virtual ~Link() = default;
    virtual void send(std::vector<uint8_t> pkt, uint64_t at) = 0;
    virtual std::optional<std::vector<uint8_t>> poll(uint64_t at) = 0;
    virtual uint64_t sent_count() const = 0;
    virtual uint64_t delivered_count() const = 0;
};

/// Deterministic simulated link. Delivery time is send tick + latency +
/// seeded jitter; with reorder disabled delivery order always equals send
/// order regardless of jitter.
class SimLink final : public Link {
public:
    explicit SimLink(SimNetConfig cfg);

    void send(std::vector<uint8_t> pkt, uint64_t at) override;
    std::optional<std::vector<uint8_t>> poll(uint64_t at) override;

    uint64_t sent_count() const override { return next_ordinal_; }
    uint64_t delivered_count() const override { return delivered_; }
    uint64_t dropped_count() const { return dropped_; }

private:
    struct InFlight {
        uint64_t due;
        uint64_t ordinal;
        std::vector<uint8_t> bytes;
        bool operator>(const InFlight& o) const
        {
            return due != o.due ? due > o.due : ordinal > o.ordinal;
        }
    };

    SimNetConfig cfg_;
    Rng rng_;
    std::priority_queue<InFlight, std::vector<InFlight>, std::greater<InFlight>> queue_;
    uint64_t next_ordinal_ = 0;
    uint64_t last_due_ = 0;
    uint64_t delivered_ = 0;
    uint64_t dropped_ = 0;
};

/// UDP loopback backend with the same poll contract. One datagram carries one
/// CHDR packet. Functionally interchangeable with SimLink but the kernel
/// clocks delivery, so runs over it are not deterministic and it is excluded
/// from the acceptance suite.
class UdpLink final : public Link {
public:
    /// Binds local_port on 127.0.0.1 and targets remote_port.
    UdpLink(uint16_t local_port, uint16_t remote_port, const std::string& host = "127.0.0.1");
    ~UdpLink() override;

    UdpLink(const UdpLink&) = delete;
    UdpLink& operator=(const UdpLink&) = delete;

    void send(std::vector<uint8_t> pkt, uint64_t at) override;
    std::optional<std::vector<uint8_t>> poll(uint64_t at) override;

    uint64_t sent_count() const override { return sent_; }
    uint64_t delivered_count() const override { return delivered_; }

private:
    int fd_ = -1;
    uint16_t remote_port_;
    std::string host_;
    uint64_t sent_ = 0;
    uint64_t delivered_ = 0;
};

} // namespace chdrt

#endif
