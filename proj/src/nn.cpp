#include "uavsearch/nn.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <sstream>
#include <tuple>

namespace uavsearch::nn {

void QNetworkSpec::validate() const {
  if (in_channels < 1) throw std::invalid_argument("network: in_channels must be >= 1");
  if (head.empty()) throw std::invalid_argument("network: head needs at least the output layer");
  for (int w : head) {
    if (w < 1) throw std::invalid_argument("network: dense widths must be >= 1");
  }
  for (const auto& [branch, size, name] :
       {std::tuple{&local_branch, local_size, "local"}, std::tuple{&global_branch, global_size, "global"}}) {
    if (size < 1) throw std::invalid_argument(std::string("network: ") + name + " input size must be >= 1");
    int s = size;
    for (const ConvSpec& c : *branch) {
      if (c.kernel < 1 || c.channels < 1) {
        throw std::invalid_argument(std::string("network: bad conv layer in ") + name + " branch");
      }
      s -= c.kernel - 1;
      if (s < 1) throw std::invalid_argument(std::string("network: ") + name + " branch shrinks below 1x1");
    }
  }
}

std::string QNetworkSpec::describe() const {
  std::ostringstream os;
  os << "qnet/v1 in=" << in_channels << " local=" << local_size << ':' << format_conv_list(local_branch)
     << " global=" << global_size << ':' << format_conv_list(global_branch)
     << " head=" << format_width_list(head);
  return os.str();
}

std::uint64_t QNetworkSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : describe()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::size_t QNetworkSpec::parameter_count() const { return NetworkLayout(*this).parameter_count; }

QNetworkSpec QNetworkSpec::full_scale(int F, int G, int actions) {
  QNetworkSpec spec;
  spec.local_size = F;
  spec.global_size = G;
  spec.local_branch = {{5, 16}, {3, 64}};
  spec.global_branch = {{5, 16}, {3, 12}};
  spec.head = {256, 256, 256, actions};
  return spec;
}

std::vector<ConvSpec> parse_conv_list(const std::string& text) {
  std::vector<ConvSpec> out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw std::invalid_argument("conv layer '" + item + "' must look like KxC");
    out.push_back({std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1))});
  }
  return out;
}

std::string format_conv_list(const std::vector<ConvSpec>& convs) {
  if (convs.empty()) return "none";
  std::string out;
  for (const ConvSpec& c : convs) {
    if (!out.empty()) out += ',';
    out += std::to_string(c.kernel) + 'x' + std::to_string(c.channels);
  }
  return out;
}

std::vector<int> parse_width_list(const std::string& text) {
  std::vector<int> out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::string format_width_list(const std::vector<int>& widths) {
  if (widths.empty()) return "none";
  std::string out;
  for (int w : widths) {
    if (!out.empty()) out += ',';
    out += std::to_string(w);
  }
  return out;
}

NetworkLayout::NetworkLayout(const QNetworkSpec& spec) {
  spec.validate();
  std::size_t offset = 0;
  auto build = [&](const std::vector<ConvSpec>& convs, int size, std::vector<ConvLayout>& out) {
    int channels = spec.in_channels;
    for (const ConvSpec& c : convs) {
      ConvLayout l;
      l.in_channels = channels;
      l.out_channels = c.channels;
      l.kernel = c.kernel;
      l.in_size = size;
      l.out_size = size - c.kernel + 1;
      l.weight_offset = offset;
      offset += static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel;
      l.bias_offset = offset;
      offset += static_cast<std::size_t>(l.out_channels);
      out.push_back(l);
      channels = c.channels;
      size = l.out_size;
    }
    return channels * size * size;
  };
  local_features = build(spec.local_branch, spec.local_size, local);
  global_features = build(spec.global_branch, spec.global_size, global);
  int in = feature_count();
  for (int width : spec.head) {
    DenseLayout l;
    l.in = in;
    l.out = width;
    l.weight_offset = offset;
    offset += static_cast<std::size_t>(l.in) * l.out;
    l.bias_offset = offset;
    offset += static_cast<std::size_t>(l.out);
    dense.push_back(l);
    in = width;
  }
  parameter_count = offset;
}

LossValue smooth_l1(double y_hat, double y, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("smooth_l1: beta must be > 0");
  const double d = y_hat - y;
  if (std::abs(d) < beta) return {0.5 * d * d / beta, d / beta};
  return {std::abs(d) - 0.5 * beta, d > 0.0 ? 1.0 : -1.0};
}

namespace {

constexpr std::array<char, 8> kMagic = {'U', 'A', 'V', 'Q', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kByteOrderTag = 0x01020304u;

template <typename T>
void put_le(std::ostream& os, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu));
  }
}

template <typename T>
T get_le(std::istream& is) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("checkpoint: truncated file");
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(value);
}

CheckpointHeader read_header(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("checkpoint: bad magic bytes");
  CheckpointHeader header;
  header.version = get_le<std::uint32_t>(is);
  if (header.version != kFormatVersion) throw std::runtime_error("checkpoint: unsupported format version");
  if (get_le<std::uint32_t>(is) != kByteOrderTag) throw std::runtime_error("checkpoint: bad byte-order tag");
  header.spec_hash = get_le<std::uint64_t>(is);
  header.parameter_count = get_le<std::uint64_t>(is);
  return header;
}

}  // namespace

void save_params(const std::filesystem::path& path, const QNetworkSpec& spec, const Vector<float>& params) {
  if (static_cast<std::size_t>(params.size()) != spec.parameter_count()) {
    throw std::invalid_argument("save_params: parameter count does not match the spec");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le(os, kFormatVersion);
  put_le(os, kByteOrderTag);
  put_le(os, spec.hash());
  put_le(os, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) put_le(os, std::bit_cast<std::uint32_t>(params(i)));
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_header(is);
}

Vector<float> load_params(const std::filesystem::path& path, const QNetworkSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  const CheckpointHeader header = read_header(is);
  if (header.spec_hash != spec.hash()) {
    throw std::runtime_error("checkpoint: spec hash mismatch (checkpoint was written for a different network)");
  }
  if (header.parameter_count != spec.parameter_count()) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }
  Vector<float> params(static_cast<Eigen::Index>(header.parameter_count));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    params(i) = std::bit_cast<float>(get_le<std::uint32_t>(is));
  }
  return params;
}

}  // namespace uavsearch::nn
