#include "cosim/address_map.hpp"

#include <set>
#include <string>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

AgentAddressMap::AgentAddressMap(std::vector<AgentAddress> entries) : entries_(std::move(entries)) {
    std::set<uint32_t> ids;
    std::set<Ipv4> addresses;
    for (size_t i = 0; i < entries_.size(); ++i) {
        const std::string path = "/agent_address_map/" + std::to_string(i);
        if (!ids.insert(entries_[i].agent_id).second) throw ConfigError(path + "/agent_id", "duplicate agent id");
        if (!addresses.insert(entries_[i].address).second) throw ConfigError(path + "/address", "duplicate address");
    }
}

std::optional<uint32_t> AgentAddressMap::agent_of(Ipv4 address) const {
    for (const AgentAddress& e : entries_) {
        if (e.address == address) return e.agent_id;
    }
    return std::nullopt;
}

std::optional<Ipv4> AgentAddressMap::address_of(uint32_t agent_id) const {
    for (const AgentAddress& e : entries_) {
        if (e.agent_id == agent_id) return e.address;
    }
    return std::nullopt;
}

}  // namespace cosim
