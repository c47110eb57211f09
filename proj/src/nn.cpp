#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dlrisk/nn/checkpoint.hpp"

namespace dlrisk::nn {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'L', 'R', 'N', 'N', 'C', 'K', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append(std::vector<double>& out, const auto& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data()[i]);
}

template <typename M>
void take(M& m, const std::vector<double>& params, std::size_t& offset) {
  const auto n = static_cast<std::size_t>(m.size());
  if (offset + n > params.size()) throw SchemaError("checkpoint: parameter block too short");
  std::memcpy(m.data(), params.data() + offset, n * sizeof(double));
  offset += n;
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  if (s == "softmax") return Activation::Softmax;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::string bytes(kMagic, sizeof kMagic);
  put_u64(bytes, data.header.size());
  bytes += data.header;
  bytes.reserve(bytes.size() + 8 * data.params.size());
  for (double v : data.params) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw SchemaError(path.string() + ": not a model checkpoint");
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (16 + header_len > bytes.size() || (bytes.size() - 16 - header_len) % 8 != 0)
    throw SchemaError(path.string() + ": truncated checkpoint");
  CheckpointData data;
  data.header = bytes.substr(16, header_len);
  const char* p = bytes.data() + 16 + header_len;
  const std::size_t n = (bytes.size() - 16 - header_len) / 8;
  data.params.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.params[i] = std::bit_cast<double>(get_u64(p + 8 * i));
  return data;
}

std::string network_topology(const Network<double>& net) {
  json blocks = json::array();
  for (const auto& b : net.blocks) {
    json j = {{"in", b.dense.inputs()},
              {"out", b.dense.outputs()},
              {"activation", to_string(b.dense.activation)},
              {"leak", b.dense.leak},
              {"dropout", b.dropout},
              {"batch_norm", b.bn.has_value()}};
    if (b.bn) {
      j["bn_momentum"] = b.bn->momentum;
      j["bn_epsilon"] = b.bn->epsilon;
      j["bn_initialised"] = b.bn->initialised;
    }
    blocks.push_back(j);
  }
  return blocks.dump();
}

void append_parameters(const Network<double>& net, std::vector<double>& out) {
  for (const auto& b : net.blocks) {
    append(out, b.dense.W);
    append(out, b.dense.b);
    if (b.bn) {
      append(out, b.bn->gamma);
      append(out, b.bn->beta);
      append(out, b.bn->running_mean);
      append(out, b.bn->running_var);
    }
  }
}

Network<double> network_from(const std::string& topology, const std::vector<double>& params, std::size_t& offset) {
  Network<double> net;
  try {
    for (const auto& j : json::parse(topology)) {
      Block<double> b;
      const auto in = j.at("in").get<Eigen::Index>();
      const auto out = j.at("out").get<Eigen::Index>();
      if (in <= 0 || out <= 0) throw SchemaError("checkpoint: non-positive layer size");
      b.dense.W.resize(out, in);
      b.dense.b.resize(out);
      b.dense.activation = parse_activation(j.at("activation").get<std::string>());
      b.dense.leak = j.at("leak").get<double>();
      b.dropout = j.at("dropout").get<double>();
      take(b.dense.W, params, offset);
      take(b.dense.b, params, offset);
      if (j.at("batch_norm").get<bool>()) {
        auto bn = BatchNormLayer<double>::identity(out);
        bn.momentum = j.at("bn_momentum").get<double>();
        bn.epsilon = j.at("bn_epsilon").get<double>();
        bn.initialised = j.at("bn_initialised").get<bool>();
        take(bn.gamma, params, offset);
        take(bn.beta, params, offset);
        take(bn.running_mean, params, offset);
        take(bn.running_var, params, offset);
        b.bn = std::move(bn);
      }
      if (!net.blocks.empty() && net.blocks.back().dense.outputs() != in)
        throw SchemaError("checkpoint: layer sizes do not chain");
      net.blocks.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
  return net;
}

void save_network(const std::filesystem::path& path, const Network<double>& net, const std::string& extra) {
  CheckpointData data;
  data.header = json{{"kind", "network"}, {"layers", json::parse(network_topology(net))}, {"extra", json::parse(extra)}}
                    .dump();
  append_parameters(net, data.params);
  write_checkpoint(path, data);
}

Network<double> load_network(const std::filesystem::path& path, std::string* extra) {
  const CheckpointData data = read_checkpoint(path);
  try {
    const json header = json::parse(data.header);
    std::size_t offset = 0;
    Network<double> net = network_from(header.at("layers").dump(), data.params, offset);
    if (offset != data.params.size()) throw SchemaError(path.string() + ": trailing parameters");
    if (extra) *extra = header.value("extra", json::object()).dump();
    return net;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace dlrisk::nn
