#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cosim/wire.hpp"

namespace cosim {

// Correlates the physics-side agent id with the address of its network interface.
struct AgentAddress {
    uint32_t agent_id = 0;
    Ipv4 address;
};

class AgentAddressMap {
public:
    AgentAddressMap() = default;
    // Throws ConfigError unless the entries form a bijection.
    explicit AgentAddressMap(std::vector<AgentAddress> entries);

    std::optional<uint32_t> agent_of(Ipv4 address) const;
    std::optional<Ipv4> address_of(uint32_t agent_id) const;
    bool contains(Ipv4 address) const { return agent_of(address).has_value(); }

    const std::vector<AgentAddress>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

private:
    std::vector<AgentAddress> entries_;
};

}  // namespace cosim
