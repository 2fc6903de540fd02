#include "ctce/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctce {

Tensor& ParameterSet::add(const std::string& path, Tensor t) {
  if (items_.count(path)) throw std::invalid_argument("ParameterSet: duplicate path " + path);
  t.set_requires_grad(true);
  auto [it, ok] = items_.emplace(path, std::move(t));
  (void)ok;
  return it->second;
}

Tensor& ParameterSet::at(const std::string& path) {
  auto it = items_.find(path);
  if (it == items_.end()) throw std::invalid_argument("ParameterSet: missing path " + path);
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& path) const {
  auto it = items_.find(path);
  if (it == items_.end()) throw std::invalid_argument("ParameterSet: missing path " + path);
  return it->second;
}

void ParameterSet::zero_grad() {
  for (auto& [path, t] : items_) t.zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& [path, t] : items_) out.add(path, Tensor(t.rows(), t.cols(), t.values()));
  return out;
}

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'T', 'C', 'E', 'P', 'A', 'R', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void ParameterSet::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 8);
  write_le<uint32_t>(os, static_cast<uint32_t>(items_.size()));
  for (const auto& [name, t] : items_) {
    write_le<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<uint8_t>(os, 2);  // rank: all tensors are 2-D
    write_le<uint32_t>(os, static_cast<uint32_t>(t.rows()));
    write_le<uint32_t>(os, static_cast<uint32_t>(t.cols()));
    for (double v : t.values()) write_le<double>(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ParameterSet ParameterSet::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint32_t count = read_le<uint32_t>(is);
  ParameterSet out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = read_le<uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const uint8_t rank = read_le<uint8_t>(is);
    if (rank != 2) throw std::runtime_error("checkpoint: unsupported rank");
    const int rows = static_cast<int>(read_le<uint32_t>(is));
    const int cols = static_cast<int>(read_le<uint32_t>(is));
    std::vector<double> vals(static_cast<size_t>(rows) * cols);
    for (auto& v : vals) v = read_le<double>(is);
    out.add(name, Tensor(rows, cols, std::move(vals)));
  }
  return out;
}

namespace {

Tensor uniform_tensor(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(static_cast<size_t>(rows) * cols);
  for (auto& x : v) x = dist(rng);
  return Tensor(rows, cols, std::move(v));
}

Tensor apply_act(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::relu: return relu(x);
    case Activation::gelu: return gelu(x);
    case Activation::none: return x;
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

void init_mlp(ParameterSet& params, const std::string& prefix, const MlpSpec& spec,
              std::mt19937_64& rng) {
  if (spec.widths.size() < 2) throw std::invalid_argument("MlpSpec: need at least one layer");
  for (size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const int in = spec.widths[l], out = spec.widths[l + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("MlpSpec: widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    params.add(prefix + "/w" + std::to_string(l), uniform_tensor(in, out, bound, rng));
    params.add(prefix + "/b" + std::to_string(l), uniform_tensor(1, out, bound, rng));
  }
}

void init_attention(ParameterSet& params, const std::string& prefix, int dim,
                    std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const char* name : {"/wq", "/wk", "/wv", "/wo"})
    params.add(prefix + name, uniform_tensor(dim, dim, bound, rng));
}

Tensor mlp_forward(const Tensor& x, const MlpSpec& spec, const ParameterSet& params,
                   const std::string& prefix) {
  if (x.cols() != spec.in_width())
    throw std::invalid_argument("mlp_forward: input width mismatch");
  Tensor h = x;
  const size_t layers = spec.widths.size() - 1;
  for (size_t l = 0; l < layers; ++l) {
    const Tensor& w = params.at(prefix + "/w" + std::to_string(l));
    const Tensor& b = params.at(prefix + "/b" + std::to_string(l));
    h = add_rowvec(matmul(h, w), b);
    if (l + 1 < layers) h = apply_act(h, spec.act);
  }
  return h;
}

Tensor mha_cross_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                           int heads, const ParameterSet& params, const std::string& prefix) {
  const int d = queries.cols();
  if (heads <= 0 || d % heads != 0)
    throw std::invalid_argument("mha: dim must be divisible by heads");
  if (keys.rows() == 0) throw std::invalid_argument("mha: empty context");
  if (keys.cols() != d || values.cols() != d || keys.rows() != values.rows())
    throw std::invalid_argument("mha: key/value shape mismatch");

  const Tensor q = matmul(queries, params.at(prefix + "/wq"));
  const Tensor k = matmul(keys, params.at(prefix + "/wk"));
  const Tensor v = matmul(values, params.at(prefix + "/wv"));

  const int dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, dh);
    const Tensor kh = slice_cols(k, h * dh, dh);
    const Tensor vh = slice_cols(v, h * dh, dh);
    const Tensor att = softmax_rows(scale(matmul(qh, transpose(kh)), inv_scale));
    head_outs.push_back(matmul(att, vh));
  }
  Tensor merged = head_outs[0];
  for (int h = 1; h < heads; ++h) merged = concat_cols(merged, head_outs[h]);
  return matmul(merged, params.at(prefix + "/wo"));
}

Tensor sinusoidal_encode(double t, int dim, double base) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("sinusoidal_encode: dim must be even");
  if (base <= 1.0) throw std::invalid_argument("sinusoidal_encode: base must exceed 1");
  std::vector<double> out(static_cast<size_t>(dim));
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(base, -2.0 * i / dim);
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
  return Tensor::row(out);
}

Tensor sinusoidal_encode_point(double x, double y, double z, int dim_per_axis, double base) {
  Tensor ex = sinusoidal_encode(x, dim_per_axis, base);
  Tensor ey = sinusoidal_encode(y, dim_per_axis, base);
  Tensor ez = sinusoidal_encode(z, dim_per_axis, base);
  return concat_cols(concat_cols(ex, ey), ez);
}

}  // namespace ctce
