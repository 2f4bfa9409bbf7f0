#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/rng.hpp"
#include "geobridge/sphere.hpp"

// Time-conditioned vector-field approximator: a fully-connected stack on
// the concatenation of ambient coordinates and sinusoidal time features,
// with a linear read-out of ambient dimension. Rows are batch samples
// throughout. Besides the usual forward/reverse passes the net exposes a
// forward-mode pass (spatial Jacobian-vector products, used for manifold
// divergences) and the reverse sweep THROUGH that forward-mode pass, which
// is what the divergence term of the score-matching loss differentiates.
//
// Reverse-through-forward bookkeeping, top layer L down to 1, with
// z_l = a_{l-1} W_l^T + b_l, a_l = act(z_l), tangent stream zdot/adot:
//   r_l = dS/dzdot_l, q_l = dS/dz_l
//   dS/dW_l += r_l^T adot_{l-1} + q_l^T a_{l-1},  dS/db_l += colsum(q_l)
//   A = r_l W_l, G = q_l W_l
//   r_{l-1} = act'(z) . A
//   q_{l-1} = act'(z) . G + act''(z) . zdot_{l-1} . A
// The act'' coupling is why score nets need a twice-differentiable
// activation; relu is rejected there.

namespace geobridge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { Tanh, Relu };

inline std::string activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "'");
}

struct FieldNet {
  int ambient_dim = 0;
  int time_freqs = 4;
  Activation act = Activation::Tanh;
  std::vector<MatrixXd> w;  // w[l]: [out x in]
  std::vector<VectorXd> b;

  int input_dim() const { return ambient_dim + 2 * time_freqs; }
  std::size_t layers() const { return w.size(); }

  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim());
    for (const auto& m : w) dims.push_back(static_cast<int>(m.rows()));
    return dims;
  }

  Eigen::Index n_params() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
    return n;
  }

  VectorXd params_flat() const {
    VectorXd p(n_params());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      p.segment(at, w[l].size()) = Eigen::Map<const VectorXd>(w[l].data(), w[l].size());
      at += w[l].size();
      p.segment(at, b[l].size()) = b[l];
      at += b[l].size();
    }
    return p;
  }

  void set_params_flat(const VectorXd& p) {
    if (p.size() != n_params()) throw ConfigError("parameter vector size mismatch");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      Eigen::Map<VectorXd>(w[l].data(), w[l].size()) = p.segment(at, w[l].size());
      at += w[l].size();
      b[l] = p.segment(at, b[l].size());
      at += b[l].size();
    }
  }
};

/// Hidden layers of equal width; weights seeded and scaled by fan-in
/// (doubled variance under relu), biases zero.
inline FieldNet make_field_net(int ambient_dim, int hidden, int depth, int time_freqs,
                               Activation act, std::uint64_t seed) {
  if (ambient_dim < 1 || hidden < 1 || depth < 1 || time_freqs < 0)
    throw ConfigError("bad field net shape");
  FieldNet net;
  net.ambient_dim = ambient_dim;
  net.time_freqs = time_freqs;
  net.act = act;
  std::vector<int> dims;
  dims.push_back(net.input_dim());
  for (int l = 0; l < depth; ++l) dims.push_back(hidden);
  dims.push_back(ambient_dim);
  auto rng = make_stream(seed, 0x6e65);
  std::normal_distribution<double> n01;
  const double gain = act == Activation::Relu ? 2.0 : 1.0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MatrixXd wl(dims[l + 1], dims[l]);
    const double scale = std::sqrt(gain / dims[l]);
    for (Eigen::Index i = 0; i < wl.size(); ++i) wl.data()[i] = scale * n01(rng);
    net.w.push_back(std::move(wl));
    net.b.push_back(VectorXd::Zero(dims[l + 1]));
  }
  return net;
}

/// Interleaved sin/cos of 2^k pi t, k = 0..K-1.
inline Eigen::RowVectorXd time_features(int freqs, double t) {
  Eigen::RowVectorXd f(2 * freqs);
  double scale = sphere::kPi;
  for (int k = 0; k < freqs; ++k) {
    f(2 * k) = std::sin(scale * t);
    f(2 * k + 1) = std::cos(scale * t);
    scale *= 2.0;
  }
  return f;
}

inline MatrixXd assemble_input(const FieldNet& net, const VectorXd& t, const MatrixXd& x) {
  if (t.size() != x.rows()) throw SizeError("time/state row mismatch");
  if (x.cols() != net.ambient_dim) throw ConfigError("field net ambient dimension mismatch");
  MatrixXd in(x.rows(), net.input_dim());
  in.leftCols(net.ambient_dim) = x;
  for (Eigen::Index i = 0; i < t.size(); ++i)
    in.block(i, net.ambient_dim, 1, 2 * net.time_freqs) = time_features(net.time_freqs, t(i));
  return in;
}

struct ForwardCache {
  std::vector<MatrixXd> a;  // a[0] = input, a[l] = act(z_l) for hidden l
};

namespace detail {

inline MatrixXd act_apply(Activation act, const MatrixXd& z) {
  if (act == Activation::Tanh) return z.array().tanh();
  return z.cwiseMax(0.0);
}

// First/second derivatives from the stored activation value.
inline MatrixXd act_d1(Activation act, const MatrixXd& a) {
  if (act == Activation::Tanh) return 1.0 - a.array().square();
  return (a.array() > 0.0).cast<double>();
}

inline MatrixXd act_d2(Activation act, const MatrixXd& a) {
  if (act == Activation::Tanh) return -2.0 * a.array() * (1.0 - a.array().square());
  return MatrixXd::Zero(a.rows(), a.cols());
}

}  // namespace detail

/// Raw ambient output (no tangential projection).
inline MatrixXd forward(const FieldNet& net, const VectorXd& t, const MatrixXd& x,
                        ForwardCache* cache = nullptr) {
  MatrixXd a = assemble_input(net, t, x);
  if (cache) {
    cache->a.clear();
    cache->a.push_back(a);
  }
  const std::size_t last = net.layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    MatrixXd z = a * net.w[l].transpose();
    z.rowwise() += net.b[l].transpose();
    if (l == last) return z;
    a = detail::act_apply(net.act, z);
    if (cache) cache->a.push_back(a);
  }
  return a;  // unreachable
}

struct JvpCache {
  std::vector<MatrixXd> adot;  // adot[0] = input tangent
  std::vector<MatrixXd> zdot;  // per hidden layer
};

/// Forward-mode pass: directional derivative of the raw output along an
/// input tangent (rows). Requires the primal cache.
inline MatrixXd jvp(const FieldNet& net, const ForwardCache& cache, const MatrixXd& in_dot,
                    JvpCache* jcache = nullptr) {
  MatrixXd adot = in_dot;
  if (jcache) {
    jcache->adot.assign(1, adot);
    jcache->zdot.clear();
  }
  const std::size_t last = net.layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    MatrixXd zdot = adot * net.w[l].transpose();
    if (l == last) return zdot;
    adot = detail::act_d1(net.act, cache.a[l + 1]).cwiseProduct(zdot);
    if (jcache) {
      jcache->zdot.push_back(std::move(zdot));
      jcache->adot.push_back(adot);
    }
  }
  return adot;  // unreachable
}

struct Gradients {
  std::vector<MatrixXd> gw;
  std::vector<VectorXd> gb;

  explicit Gradients(const FieldNet& net) {
    for (std::size_t l = 0; l < net.layers(); ++l) {
      gw.emplace_back(MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
      gb.emplace_back(VectorXd::Zero(net.b[l].size()));
    }
  }

  VectorXd flat() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < gw.size(); ++l) n += gw[l].size() + gb[l].size();
    VectorXd g(n);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < gw.size(); ++l) {
      g.segment(at, gw[l].size()) = Eigen::Map<const VectorXd>(gw[l].data(), gw[l].size());
      at += gw[l].size();
      g.segment(at, gb[l].size()) = gb[l];
      at += gb[l].size();
    }
    return g;
  }
};

/// Standard reverse pass: accumulates d(sum of <seed_row, output_row>)/dparams.
inline void backward(const FieldNet& net, const ForwardCache& cache, const MatrixXd& out_seed,
                     Gradients& grads) {
  const std::size_t last = net.layers() - 1;
  MatrixXd q = out_seed;
  for (std::size_t l = last + 1; l-- > 0;) {
    grads.gw[l].noalias() += q.transpose() * cache.a[l];
    grads.gb[l] += q.colwise().sum().transpose();
    if (l == 0) break;
    MatrixXd g = q * net.w[l];
    q = detail::act_d1(net.act, cache.a[l]).cwiseProduct(g);
  }
}

/// Reverse pass through the forward-mode pass: accumulates the parameter
/// gradient of sum of <dot_seed_row, jvp_output_row>. A plain primal seed
/// can ride along in the same sweep (pass zero matrices otherwise).
inline void jvp_backward(const FieldNet& net, const ForwardCache& cache, const JvpCache& jcache,
                         const MatrixXd& dot_seed, const MatrixXd& primal_seed,
                         Gradients& grads) {
  const std::size_t last = net.layers() - 1;
  MatrixXd r = dot_seed;
  MatrixXd q = primal_seed;
  for (std::size_t l = last + 1; l-- > 0;) {
    grads.gw[l].noalias() += r.transpose() * jcache.adot[l];
    grads.gw[l].noalias() += q.transpose() * cache.a[l];
    grads.gb[l] += q.colwise().sum().transpose();
    if (l == 0) break;
    MatrixXd big_a = r * net.w[l];
    MatrixXd big_g = q * net.w[l];
    const MatrixXd d1 = detail::act_d1(net.act, cache.a[l]);
    q = d1.cwiseProduct(big_g) +
        detail::act_d2(net.act, cache.a[l]).cwiseProduct(jcache.zdot[l - 1]).cwiseProduct(big_a);
    r = d1.cwiseProduct(big_a);
  }
}

/// Network output projected to the tangent space at each row (the field
/// value used by losses and samplers).
inline MatrixXd field_eval_tangent(const FieldNet& net, const VectorXd& t, const MatrixXd& x) {
  return sphere::project_tangent_rows(x, forward(net, t, x));
}

inline VectorXd field_eval_tangent(const FieldNet& net, double t, const VectorXd& x) {
  VectorXd tv = VectorXd::Constant(1, t);
  return field_eval_tangent(net, tv, MatrixXd(x.transpose())).row(0).transpose();
}

/// Spatial directional derivative of the projected field along tangent
/// rows e: P_x (J_u e) - e <x,u> - x <e,u>.
inline MatrixXd field_jvp_tangent(const FieldNet& net, const VectorXd& t, const MatrixXd& x,
                                  const MatrixXd& e) {
  ForwardCache cache;
  const MatrixXd u = forward(net, t, x, &cache);
  MatrixXd in_dot = MatrixXd::Zero(x.rows(), net.input_dim());
  in_dot.leftCols(net.ambient_dim) = e;
  const MatrixXd ju_e = jvp(net, cache, in_dot);
  const VectorXd xu = (x.array() * u.array()).rowwise().sum();
  const VectorXd eu = (e.array() * u.array()).rowwise().sum();
  return sphere::project_tangent_rows(x, ju_e) - xu.asDiagonal() * e - eu.asDiagonal() * x;
}

/// Manifold divergence of the projected field at each row:
/// sum_j <J_u e_j, e_j> - n <x, u> over an orthonormal tangent basis.
inline VectorXd field_divergence(const FieldNet& net, const VectorXd& t, const MatrixXd& x) {
  const int d = net.ambient_dim;
  const int n = d - 1;
  ForwardCache cache;
  const MatrixXd u = forward(net, t, x, &cache);
  VectorXd div = -static_cast<double>(n) * (x.array() * u.array()).rowwise().sum();
  std::vector<MatrixXd> basis(n, MatrixXd(x.rows(), d));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const MatrixXd bs = sphere::tangent_basis(x.row(i).transpose());
    for (int j = 0; j < n; ++j) basis[j].row(i) = bs.col(j).transpose();
  }
  for (int j = 0; j < n; ++j) {
    MatrixXd in_dot = MatrixXd::Zero(x.rows(), net.input_dim());
    in_dot.leftCols(d) = basis[j];
    const MatrixXd udot = jvp(net, cache, in_dot);
    div += (basis[j].array() * udot.array()).rowwise().sum().matrix();
  }
  return div;
}

// ---- checkpoint io ----

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/// Versioned textual dump: shape header, fnv64 checksum of the parameter
/// section, then one hexfloat per parameter (bit-exact round trip).
inline void save_checkpoint(const FieldNet& net, const std::string& path) {
  std::ostringstream params;
  char buf[40];
  const VectorXd p = net.params_flat();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a\n", p(i));
    params << buf;
  }
  const std::string body = params.str();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "geobridge-fieldnet 1\n";
  out << "ambient_dim " << net.ambient_dim << "\n";
  out << "time_freqs " << net.time_freqs << "\n";
  out << "activation " << activation_name(net.act) << "\n";
  out << "layers";
  for (int d : net.layer_dims()) out << " " << d;
  out << "\n";
  out << "checksum " << std::hex << detail::fnv1a(body) << std::dec << "\n";
  out << "params " << p.size() << "\n";
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

inline FieldNet load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "geobridge-fieldnet" || version != 1)
    throw ParseError(path + ": not a geobridge-fieldnet v1 checkpoint");
  FieldNet net;
  std::string act_name, checksum_hex;
  std::vector<int> dims;
  Eigen::Index n_params = 0;
  while (in >> word) {
    if (word == "ambient_dim") in >> net.ambient_dim;
    else if (word == "time_freqs") in >> net.time_freqs;
    else if (word == "activation") in >> act_name;
    else if (word == "layers") {
      std::string rest;
      std::getline(in, rest);
      std::istringstream ls(rest);
      int d;
      while (ls >> d) dims.push_back(d);
    } else if (word == "checksum") in >> checksum_hex;
    else if (word == "params") {
      in >> n_params;
      break;
    } else
      throw ParseError(path + ": unexpected field '" + word + "'");
  }
  if (dims.size() < 2) throw ParseError(path + ": missing layer dims");
  net.act = activation_from_name(act_name);
  if (dims.front() != net.ambient_dim + 2 * net.time_freqs || dims.back() != net.ambient_dim)
    throw ConfigError(path + ": layer dims disagree with ambient_dim/time_freqs");
  Eigen::Index expected = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    net.w.emplace_back(MatrixXd::Zero(dims[l + 1], dims[l]));
    net.b.emplace_back(VectorXd::Zero(dims[l + 1]));
    expected += static_cast<Eigen::Index>(dims[l + 1]) * dims[l] + dims[l + 1];
  }
  if (n_params != expected)
    throw ConfigError(path + ": parameter count " + std::to_string(n_params) +
                      " does not match layer dims");
  in.ignore();  // newline after count
  std::ostringstream body;
  std::string line;
  VectorXd p(n_params);
  for (Eigen::Index i = 0; i < n_params; ++i) {
    if (!std::getline(in, line)) throw ParseError(path + ": truncated parameter section");
    body << line << "\n";
    p(i) = std::strtod(line.c_str(), nullptr);
  }
  char expect[24];
  std::snprintf(expect, sizeof expect, "%llx",
                static_cast<unsigned long long>(detail::fnv1a(body.str())));
  if (checksum_hex != expect) throw ParseError(path + ": checksum mismatch");
  net.set_params_flat(p);
  return net;
}

}  // namespace geobridge
