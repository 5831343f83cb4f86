#include "chdrt/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "chdrt/errors.hpp"

namespace chdrt {

SimLink::SimLink(SimNetConfig cfg)
    : cfg_(std::move(cfg))
    , rng_(cfg_.seed)
{
}

void SimLink::send(std::vector<uint8_t> pkt, uint64_t at)
{
    const uint64_t ordinal = next_ordinal_++;
    uint64_t due = at + cfg_.latency;
    if (cfg_.jitter_max > 0)
        due += rng_.next_below(cfg_.jitter_max + 1);

    if (cfg_.drop_plan.count(ordinal)) {
        dropped_++;
        return;
    }
    if (!cfg_.reorder && due < last_due_)
        due = last_due_;
    last_due_ = due;
    queue_.push(InFlight{ due, ordinal, std::move(pkt) });
}

std::optional<std::vector<uint8_t>> SimLink::poll(uint64_t at)
{
    if (queue_.empty() || queue_.top().due > at)
        return std::nullopt;
    std::vector<uint8_t> bytes = std::move(const_cast<InFlight&>(queue_.top()).bytes);
    queue_.pop();
    delivered_++;
    return bytes;
}

UdpLink::UdpLink(uint16_t local_port, uint16_t remote_port, const std::string& host)
    : remote_port_(remote_port)
    , host_(host)
{
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0)
        throw ConfigError(std::string("socket: ") + std::strerror(errno));

    int flags = ::fcntl(fd_, F_GETFL, 0);
    ::fcntl(fd_, F_SETFL, flags | O_NONBLOCK);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(local_port);
    ::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        throw ConfigError("bind 127.0.0.1:" + std::to_string(local_port) + ": " +
                          std::strerror(errno));
    }
}

UdpLink::~UdpLink()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void UdpLink::send(std::vector<uint8_t> pkt, uint64_t)
{
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(remote_port_);
    ::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr);
    ::sendto(fd_, pkt.data(), pkt.size(), 0, reinterpret_cast<sockaddr*>(&addr),
             sizeof(addr));
    sent_++;
}

std::optional<std::vector<uint8_t>> UdpLink::poll(uint64_t)
{
    uint8_t buf[65536];
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n < 0)
        return std::nullopt; // EWOULDBLOCK or transient error: poll never blocks
    delivered_++;
    return std::vector<uint8_t>(buf, buf + n);
}

} // namespace chdrt
