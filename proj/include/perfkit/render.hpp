#pragma once

#include <perfkit/topology.hpp>

#include <string>

namespace perfkit::topo {

// Sectioned topology report: header, thread table, socket lists and one
// block per data or unified cache. `extended` adds associativity, set
// count, line size and inclusiveness to each cache block.
std::string render_text(const TopologyMap& topo, bool extended);

// One box per socket: a row of core boxes listing their hardware threads,
// then one row per cache level with each box spanning its sharing group.
std::string render_ascii_art(const TopologyMap& topo);

// "32 kB", "12 MB".
std::string format_cache_size(std::uint64_t bytes, bool with_space = true);

}  // namespace perfkit::topo
