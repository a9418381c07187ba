#include "feasreg/mlp.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "feasreg/io.hpp"

namespace feasreg {

Mlp Mlp::make(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw ModelError("Mlp: need at least input and output layer");
  Mlp net;
  net.sizes = sizes;
  net.in_offset.assign(static_cast<size_t>(sizes.front()), 0.0);
  net.in_scale.assign(static_cast<size_t>(sizes.front()), 1.0);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(static_cast<size_t>(fan_in) * static_cast<size_t>(fan_out));
    for (double& x : w) x = rng.uniform(-limit, limit);
    net.W.push_back(std::move(w));
    net.b.emplace_back(static_cast<size_t>(fan_out), 0.0);
  }
  return net;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

void Mlp::forward(const double* in, double* out) const {
  MlpTape tape;
  mlp_forward_tape(*this, in, tape);
  std::memcpy(out, tape.act.back().data(), sizeof(double) * static_cast<size_t>(output_dim()));
}

MlpGrads::MlpGrads(const Mlp& net) {
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    W.emplace_back(net.W[l].size(), 0.0);
    b.emplace_back(net.b[l].size(), 0.0);
  }
}
void MlpGrads::zero() {
  for (auto& w : W) std::fill(w.begin(), w.end(), 0.0);
  for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
}
void MlpGrads::axpy(double s, const MlpGrads& o) {
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (std::size_t i = 0; i < W[l].size(); ++i) W[l][i] += s * o.W[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += s * o.b[l][i];
  }
}

void mlp_forward_tape(const Mlp& net, const double* in, MlpTape& tape) {
  const std::size_t L = net.W.size();
  tape.act.resize(L + 1);
  tape.pre.resize(L);
  auto& a0 = tape.act[0];
  a0.resize(static_cast<size_t>(net.input_dim()));
  for (int i = 0; i < net.input_dim(); ++i)
    a0[static_cast<size_t>(i)] =
        (in[i] - net.in_offset[static_cast<size_t>(i)]) * net.in_scale[static_cast<size_t>(i)];
  for (std::size_t l = 0; l < L; ++l) {
    const int ni = net.sizes[l], no = net.sizes[l + 1];
    auto& z = tape.pre[l];
    z.assign(static_cast<size_t>(no), 0.0);
    const auto& a = tape.act[l];
    for (int o = 0; o < no; ++o) {
      double acc = net.b[l][static_cast<size_t>(o)];
      const double* wrow = net.W[l].data() + static_cast<size_t>(o) * static_cast<size_t>(ni);
      for (int i = 0; i < ni; ++i) acc += wrow[i] * a[static_cast<size_t>(i)];
      z[static_cast<size_t>(o)] = acc;
    }
    auto& out = tape.act[l + 1];
    out.resize(static_cast<size_t>(no));
    const bool hidden = l + 1 < L;
    for (int o = 0; o < no; ++o) {
      const double v = z[static_cast<size_t>(o)];
      out[static_cast<size_t>(o)] = hidden ? (v > 0 ? v : 0.0) : v;  // ReLU, subgradient 0 at 0
    }
  }
}

void mlp_backward(const Mlp& net, const MlpTape& tape, const double* dout, MlpGrads* grads,
                  double* din) {
  const std::size_t L = net.W.size();
  std::vector<double> delta(tape.act[L].size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = dout[i];
  for (std::size_t l = L; l-- > 0;) {
    const int ni = net.sizes[l], no = net.sizes[l + 1];
    const bool hidden = l + 1 < L;
    if (hidden) {
      for (int o = 0; o < no; ++o)
        if (tape.pre[l][static_cast<size_t>(o)] <= 0) delta[static_cast<size_t>(o)] = 0;
    }
    if (grads) {
      const auto& a = tape.act[l];
      for (int o = 0; o < no; ++o) {
        const double d = delta[static_cast<size_t>(o)];
        if (d == 0) continue;
        double* grow = grads->W[l].data() + static_cast<size_t>(o) * static_cast<size_t>(ni);
        for (int i = 0; i < ni; ++i) grow[i] += d * a[static_cast<size_t>(i)];
        grads->b[l][static_cast<size_t>(o)] += d;
      }
    }
    std::vector<double> prev(static_cast<size_t>(ni), 0.0);
    for (int o = 0; o < no; ++o) {
      const double d = delta[static_cast<size_t>(o)];
      if (d == 0) continue;
      const double* wrow = net.W[l].data() + static_cast<size_t>(o) * static_cast<size_t>(ni);
      for (int i = 0; i < ni; ++i) prev[static_cast<size_t>(i)] += d * wrow[i];
    }
    delta = std::move(prev);
  }
  if (din)
    for (int i = 0; i < net.input_dim(); ++i)
      din[i] = delta[static_cast<size_t>(i)] * net.in_scale[static_cast<size_t>(i)];
}

void mlp_input_grad(const Mlp& net, const double* in, int j, double* din) {
  MlpTape tape;
  mlp_forward_tape(net, in, tape);
  std::vector<double> dout(static_cast<size_t>(net.output_dim()), 0.0);
  dout[static_cast<size_t>(j)] = 1.0;
  mlp_backward(net, tape, dout.data(), nullptr, din);
}

Adam::Adam(const Mlp& net, double lr_) : lr(lr_) {
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    mW.emplace_back(net.W[l].size(), 0.0);
    vW.emplace_back(net.W[l].size(), 0.0);
    mb.emplace_back(net.b[l].size(), 0.0);
    vb.emplace_back(net.b[l].size(), 0.0);
  }
}

void Adam::update(Mlp& net, const MlpGrads& g) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  auto upd = [&](std::vector<double>& p, const std::vector<double>& gr, std::vector<double>& m,
                 std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1 - beta1) * gr[i];
      v[i] = beta2 * v[i] + (1 - beta2) * gr[i] * gr[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  };
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    upd(net.W[l], g.W[l], mW[l], vW[l]);
    upd(net.b[l], g.b[l], mb[l], vb[l]);
  }
}

void squash_action(const double* z, const Vec& lower, const Vec& upper, int m, double* u) {
  for (int a = 0; a < m; ++a) {
    const double mid = 0.5 * (lower[a] + upper[a]);
    const double half = 0.5 * (upper[a] - lower[a]);
    u[a] = mid + half * std::tanh(z[a]);
  }
}

void squash_jac(const double* z, const Vec& lower, const Vec& upper, int m, double* dudz) {
  for (int a = 0; a < m; ++a) {
    const double half = 0.5 * (upper[a] - lower[a]);
    const double th = std::tanh(z[a]);
    dudz[a] = half * (1.0 - th * th);
  }
}

namespace {

void write_net(std::ofstream& out, const Mlp& net) {
  const uint32_t nl = static_cast<uint32_t>(net.sizes.size());
  out.write(reinterpret_cast<const char*>(&nl), sizeof(nl));
  for (int s : net.sizes) {
    const uint32_t v = static_cast<uint32_t>(s);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  out.write(reinterpret_cast<const char*>(net.in_offset.data()),
            static_cast<std::streamsize>(sizeof(double) * net.in_offset.size()));
  out.write(reinterpret_cast<const char*>(net.in_scale.data()),
            static_cast<std::streamsize>(sizeof(double) * net.in_scale.size()));
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    out.write(reinterpret_cast<const char*>(net.W[l].data()),
              static_cast<std::streamsize>(sizeof(double) * net.W[l].size()));
    out.write(reinterpret_cast<const char*>(net.b[l].data()),
              static_cast<std::streamsize>(sizeof(double) * net.b[l].size()));
  }
}

Mlp read_net(std::ifstream& in) {
  uint32_t nl = 0;
  in.read(reinterpret_cast<char*>(&nl), sizeof(nl));
  if (!in || nl < 2 || nl > 16) throw ModelError("checkpoint: bad layer count");
  std::vector<int> sizes(nl);
  for (auto& s : sizes) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    s = static_cast<int>(v);
  }
  Mlp net;
  net.sizes = sizes;
  net.in_offset.resize(static_cast<size_t>(sizes.front()));
  net.in_scale.resize(static_cast<size_t>(sizes.front()));
  in.read(reinterpret_cast<char*>(net.in_offset.data()),
          static_cast<std::streamsize>(sizeof(double) * net.in_offset.size()));
  in.read(reinterpret_cast<char*>(net.in_scale.data()),
          static_cast<std::streamsize>(sizeof(double) * net.in_scale.size()));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    std::vector<double> w(static_cast<size_t>(sizes[l]) * static_cast<size_t>(sizes[l + 1]));
    std::vector<double> bb(static_cast<size_t>(sizes[l + 1]));
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(sizeof(double) * w.size()));
    in.read(reinterpret_cast<char*>(bb.data()),
            static_cast<std::streamsize>(sizeof(double) * bb.size()));
    net.W.push_back(std::move(w));
    net.b.push_back(std::move(bb));
  }
  if (!in) throw ModelError("checkpoint: truncated file");
  return net;
}

constexpr char kMagic[8] = {'F', 'R', 'C', 'K', 'P', 'T', '1', '\0'};

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  ensure_parent_dir(path);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    const int64_t iter = c.iteration;
    out.write(reinterpret_cast<const char*>(&iter), sizeof(iter));
    out.write(reinterpret_cast<const char*>(&c.seed), sizeof(c.seed));
    const uint32_t extra = static_cast<uint32_t>(c.extra.size());
    out.write(reinterpret_cast<const char*>(&extra), sizeof(extra));
    write_net(out, c.policy);
    write_net(out, c.value);
    for (const Mlp& n : c.extra) write_net(out, n);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ModelError("not a checkpoint file: " + path);
  Checkpoint c;
  int64_t iter = 0;
  in.read(reinterpret_cast<char*>(&iter), sizeof(iter));
  c.iteration = iter;
  in.read(reinterpret_cast<char*>(&c.seed), sizeof(c.seed));
  uint32_t extra = 0;
  in.read(reinterpret_cast<char*>(&extra), sizeof(extra));
  c.policy = read_net(in);
  c.value = read_net(in);
  for (uint32_t i = 0; i < extra; ++i) c.extra.push_back(read_net(in));
  return c;
}

}  // namespace feasreg
