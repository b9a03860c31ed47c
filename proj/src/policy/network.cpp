#include "opd/policy/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"
#include "opd/numerics/rng.hpp"

namespace opd::policy {

using num::Tensor;

std::string to_string(Algorithm a) { return a == Algorithm::kDqn ? "dqn" : "ppo"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "dqn") return Algorithm::kDqn;
  if (name == "ppo") return Algorithm::kPpo;
  throw ConfigError("unknown algorithm '" + name + "' (expected dqn or ppo)");
}

void validate(const Architecture& arch) {
  if (arch.input_dim == 0) throw ParameterError("network input dimension must be positive");
  if (arch.action_count == 0) throw ParameterError("network action count must be positive");
  if (arch.hidden.empty()) throw ParameterError("network needs at least one extractor layer");
  for (auto w : arch.hidden)
    if (w == 0) throw ParameterError("layer width must be positive");
}

std::string describe(const Architecture& arch) {
  std::ostringstream os;
  os << to_string(arch.algorithm) << ' ' << arch.input_dim << " -> [";
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) os << (i ? "," : "") << arch.hidden[i];
  os << "] -> " << arch.action_count;
  return os.str();
}

namespace {

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out), b(out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  for (double& v : b) v = rng.uniform(-bound, bound);
  return {Tensor::matrix(in, out, std::move(w), true), Tensor::vector(std::move(b), true)};
}

Linear clone_linear(const Linear& l) {
  if (!l.weight.defined()) return {};
  return {l.weight.clone(true), l.bias.clone(true)};
}

Tensor apply(const Linear& l, const Tensor& x) { return num::add_row(num::matmul(x, l.weight), l.bias); }

}  // namespace

PolicyNetwork::PolicyNetwork(const PolicyNetwork& other)
    : arch_(other.arch_), seed_(other.seed_), step_(other.step_) {
  for (const auto& l : other.extractor_) extractor_.push_back(clone_linear(l));
  head_ = clone_linear(other.head_);
  critic_ = clone_linear(other.critic_);
}

PolicyNetwork& PolicyNetwork::operator=(const PolicyNetwork& other) {
  if (this != &other) {
    PolicyNetwork copy(other);
    *this = std::move(copy);
  }
  return *this;
}

PolicyNetwork PolicyNetwork::init(const Architecture& arch, std::uint64_t seed) {
  validate(arch);
  PolicyNetwork net;
  net.arch_ = arch;
  net.seed_ = seed;
  Rng rng(derive_seed(seed, 0x5EED));
  std::size_t in = arch.input_dim;
  for (auto w : arch.hidden) {
    net.extractor_.push_back(make_linear(in, w, rng));
    in = w;
  }
  net.head_ = make_linear(in, arch.action_count, rng);
  if (arch.algorithm == Algorithm::kPpo) net.critic_ = make_linear(in, 1, rng);
  return net;
}

ForwardResult PolicyNetwork::forward(const Tensor& states) const {
  if (states.rank() != 2 || states.cols() != arch_.input_dim) {
    throw UsageError("policy forward: expected [n, " + std::to_string(arch_.input_dim) + "] states, got " +
                     num::to_string(states.shape()));
  }
  Tensor h = states;
  for (const auto& layer : extractor_) h = num::relu(apply(layer, h));
  ForwardResult out;
  out.feature = h;
  out.decision = apply(head_, h);
  if (arch_.algorithm == Algorithm::kPpo) {
    Tensor v = apply(critic_, h);
    // [n,1] -> [n]
    out.value = num::row_sum(v);
  }
  return out;
}

std::vector<Tensor> PolicyNetwork::parameters() const {
  std::vector<Tensor> p;
  for (const auto& l : extractor_) {
    p.push_back(l.weight);
    p.push_back(l.bias);
  }
  p.push_back(head_.weight);
  p.push_back(head_.bias);
  if (critic_.weight.defined()) {
    p.push_back(critic_.weight);
    p.push_back(critic_.bias);
  }
  return p;
}

std::size_t PolicyNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

std::vector<double> PolicyNetwork::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : parameters()) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

void PolicyNetwork::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) throw UsageError("parameter payload size does not match architecture");
  std::size_t off = 0;
  for (auto& t : parameters()) {
    auto dst = t.mutable_values();
    std::memcpy(dst.data(), values.data() + off, dst.size() * sizeof(double));
    off += dst.size();
  }
}

void PolicyNetwork::copy_parameters_from(const PolicyNetwork& other) {
  if (!(other.arch_ == arch_)) {
    throw UsageError("parameter copy between different architectures: " + describe(other.arch_) + " vs " +
                     describe(arch_));
  }
  set_flat_parameters(other.flat_parameters());
}

Tensor stack_observations(std::span<const std::vector<double>> observations) {
  std::vector<const std::vector<double>*> ptrs;
  ptrs.reserve(observations.size());
  for (const auto& o : observations) ptrs.push_back(&o);
  return stack_observations(std::span<const std::vector<double>* const>(ptrs));
}

Tensor stack_observations(std::span<const std::vector<double>* const> observations) {
  if (observations.empty()) throw UsageError("cannot stack an empty observation batch");
  const std::size_t d = observations.front()->size();
  std::vector<double> data;
  data.reserve(observations.size() * d);
  for (const auto* o : observations) {
    if (o->size() != d) throw UsageError("observation batch has inconsistent dimensions");
    data.insert(data.end(), o->begin(), o->end());
  }
  return Tensor::matrix(observations.size(), d, std::move(data));
}

// ---- checkpoint ----

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

constexpr char kMagic[8] = {'O', 'P', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IntegrityError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const PolicyNetwork& net, const std::string& path, const std::string& env_id) {
  const auto& arch = net.architecture();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint8_t>(out, arch.algorithm == Algorithm::kDqn ? 0 : 1);
  put<std::uint64_t>(out, arch.input_dim);
  put<std::uint64_t>(out, arch.hidden.size());
  for (auto w : arch.hidden) put<std::uint64_t>(out, w);
  put<std::uint64_t>(out, arch.action_count);
  put<std::uint64_t>(out, net.seed());
  put<std::int64_t>(out, net.training_step());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(env_id.size()));
  out += env_id;
  const auto params = net.flat_parameters();
  put<std::uint64_t>(out, params.size());
  for (double v : params) put<double>(out, v);
  put<std::uint64_t>(out, fnv1a(out));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw UsageError("failed writing checkpoint: " + path);
}

PolicyNetwork load_checkpoint(const std::string& path, const std::optional<Architecture>& expected,
                              CheckpointInfo* info) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IntegrityError("cannot open checkpoint: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t)) throw IntegrityError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw IntegrityError("not a checkpoint file: " + path);

  const std::string body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + body.size(), sizeof(stored_sum));

  Reader r(body);
  r.get_bytes(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  Architecture arch;
  const auto algo = r.get<std::uint8_t>();
  if (algo > 1) throw IntegrityError("checkpoint has unknown algorithm tag");
  arch.algorithm = algo == 0 ? Algorithm::kDqn : Algorithm::kPpo;
  arch.input_dim = r.get<std::uint64_t>();
  const auto layers = r.get<std::uint64_t>();
  if (layers > 1024) throw IntegrityError("checkpoint layer count implausible");
  arch.hidden.resize(layers);
  for (auto& w : arch.hidden) w = r.get<std::uint64_t>();
  arch.action_count = r.get<std::uint64_t>();
  const auto seed = r.get<std::uint64_t>();
  const auto step = r.get<std::int64_t>();
  const auto env_len = r.get<std::uint32_t>();
  std::string env_id = r.get_bytes(env_len);
  const auto count = r.get<std::uint64_t>();
  if (count > body.size()) throw IntegrityError("checkpoint truncated");
  std::vector<double> params(count);
  for (auto& v : params) v = r.get<double>();
  if (r.pos() != body.size()) throw IntegrityError("checkpoint has trailing bytes");
  if (fnv1a(body) != stored_sum) throw IntegrityError("checkpoint checksum mismatch");

  try {
    validate(arch);
  } catch (const ParameterError& e) {
    throw IntegrityError(std::string("checkpoint architecture invalid: ") + e.what());
  }
  if (expected && !(*expected == arch)) {
    throw IntegrityError("checkpoint architecture " + describe(arch) + " does not match expected " +
                         describe(*expected));
  }
  PolicyNetwork net = PolicyNetwork::init(arch, seed);
  if (count != net.parameter_count()) throw IntegrityError("checkpoint payload size does not match architecture");
  net.set_flat_parameters(params);
  net.set_training_step(step);
  if (info) *info = {version, env_id};
  return net;
}

}  // namespace opd::policy
