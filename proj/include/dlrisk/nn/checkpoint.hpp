#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dlrisk/nn/layers.hpp"

/// Model files: an 8-byte magic, the header length as a little-endian uint64,
/// a JSON header, then all parameters as little-endian float64.
namespace dlrisk::nn {

struct CheckpointData {
  std::string header;  ///< JSON text
  std::vector<double> params;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// JSON description of the layer stack (sizes, activations, dropout, batch norm).
std::string network_topology(const Network<double>& net);
/// Appends every parameter of the network in a fixed order.
void append_parameters(const Network<double>& net, std::vector<double>& out);
/// Rebuilds a network from its topology and the parameters starting at
/// `offset`; `offset` is advanced past them.
Network<double> network_from(const std::string& topology, const std::vector<double>& params, std::size_t& offset);

/// Single network plus a free-form JSON object stored under "extra".
void save_network(const std::filesystem::path& path, const Network<double>& net, const std::string& extra = "{}");
Network<double> load_network(const std::filesystem::path& path, std::string* extra = nullptr);

}  // namespace dlrisk::nn
