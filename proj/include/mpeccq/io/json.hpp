#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "mpeccq/bho/instance.hpp"
#include "mpeccq/bho/patterns.hpp"
#include "mpeccq/bho/theorems.hpp"
#include "mpeccq/core.hpp"
#include "mpeccq/cq/checkers.hpp"
#include "mpeccq/mpec_model.hpp"
#include "mpeccq/stationarity.hpp"

namespace mpeccq::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Primitive conversions

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
  return a;
}

inline json to_json(const Matrix& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

inline json to_json(const IndexList& idx) { return json(idx); }

inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing key \"") + key + "\"");
  return j.at(key);
}

inline double as_double(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

inline Index as_index(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ParseError(what + ": expected a nonnegative integer");
  return static_cast<Index>(j.get<long long>());
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = as_double(j[i], what);
  return v;
}

/// Accepts a list of rows or a flat row-major list of rows*cols numbers.
inline Matrix matrix_from_json(const json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  Matrix m(rows, cols);
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<Index>(j.size()) != rows) throw ParseError(what + ": expected " + std::to_string(rows) + " rows");
    for (Index r = 0; r < rows; ++r) {
      const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], what);
      if (row.size() != cols) throw ParseError(what + ": row " + std::to_string(r) + " has wrong length");
      m.row(r) = row.transpose();
    }
    return m;
  }
  if (static_cast<Index>(j.size()) != rows * cols)
    throw ParseError(what + ": expected " + std::to_string(rows * cols) + " entries");
  for (Index k = 0; k < rows * cols; ++k) m(k / cols, k % cols) = as_double(j[static_cast<std::size_t>(k)], what);
  return m;
}

inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

/// Pretty-printed with sorted keys (json objects are key-ordered maps).
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Evaluation records

inline PointEvaluation evaluation_from_json(const json& j) {
  const Index n = as_index(require(j, "n"), "n"), m = as_index(require(j, "m"), "m");
  const Index p = as_index(require(j, "p"), "p"), l = as_index(require(j, "l"), "l");
  PointEvaluation e;
  auto vec = [&](const char* key, Index len) {
    Vector v = vector_from_json(require(j, key), key);
    if (v.size() != len) throw ParseError(std::string(key) + ": expected length " + std::to_string(len));
    return v;
  };
  e.point = vec("point", n);
  e.g_vals = vec("g_vals", m);
  e.h_vals = vec("h_vals", p);
  e.G_vals = vec("G_vals", l);
  e.H_vals = vec("H_vals", l);
  e.g_grads = matrix_from_json(require(j, "g_grads"), m, n, "g_grads");
  e.h_grads = matrix_from_json(require(j, "h_grads"), p, n, "h_grads");
  e.G_grads = matrix_from_json(require(j, "G_grads"), l, n, "G_grads");
  e.H_grads = matrix_from_json(require(j, "H_grads"), l, n, "H_grads");
  if (j.contains("affine")) {
    if (!j["affine"].is_boolean()) throw ParseError("affine: expected a boolean");
    e.affine = j["affine"].get<bool>();
  }
  e.validate();
  return e;
}

inline json to_json(const PointEvaluation& e) {
  const auto d = e.dims();
  return json{{"n", d.n},
              {"m", d.m},
              {"p", d.p},
              {"l", d.l},
              {"point", to_json(e.point)},
              {"g_vals", to_json(e.g_vals)},
              {"h_vals", to_json(e.h_vals)},
              {"G_vals", to_json(e.G_vals)},
              {"H_vals", to_json(e.H_vals)},
              {"g_grads", to_json(e.g_grads)},
              {"h_grads", to_json(e.h_grads)},
              {"G_grads", to_json(e.G_grads)},
              {"H_grads", to_json(e.H_grads)},
              {"affine", e.affine}};
}

// ---------------------------------------------------------------------------
// BHO instances and points

inline json to_json(const bho::BhoInstance& I) {
  json A = json::array(), B = json::array();
  for (Index t = 0; t < I.T; ++t) {
    A.push_back(to_json(Matrix(I.A.block(t * I.m1, t * I.p, I.m1, I.p))));
    B.push_back(to_json(Matrix(I.B.block(t * I.m2, t * I.p, I.m2, I.p))));
  }
  return json{{"T", I.T},
              {"m1", I.m1},
              {"m2", I.m2},
              {"p", I.p},
              {"A_blocks", A},
              {"B_blocks", B},
              {"val_labels", to_json(I.val_labels)},
              {"train_labels", to_json(I.train_labels)}};
}

inline bho::BhoInstance instance_from_json(const json& j) {
  const Index T = as_index(require(j, "T"), "T"), m1 = as_index(require(j, "m1"), "m1");
  const Index m2 = as_index(require(j, "m2"), "m2"), p = as_index(require(j, "p"), "p");
  const json& A = require(j, "A_blocks");
  const json& B = require(j, "B_blocks");
  if (!A.is_array() || !B.is_array() || static_cast<Index>(A.size()) != T || static_cast<Index>(B.size()) != T)
    throw ParseError("A_blocks/B_blocks: expected T blocks each");
  std::vector<Matrix> As, Bs;
  for (Index t = 0; t < T; ++t) {
    As.push_back(matrix_from_json(A[static_cast<std::size_t>(t)], m1, p, "A_blocks"));
    Bs.push_back(matrix_from_json(B[static_cast<std::size_t>(t)], m2, p, "B_blocks"));
  }
  auto I = bho::BhoInstance::from_blocks(As, Bs);
  if (j.contains("val_labels")) I.val_labels = vector_from_json(j["val_labels"], "val_labels");
  if (j.contains("train_labels")) I.train_labels = vector_from_json(j["train_labels"], "train_labels");
  if (I.val_labels.size() != T * m1 || I.train_labels.size() != T * m2)
    throw ParseError("label vectors do not match the fold sizes");
  return I;
}

inline json to_json(const bho::BhoPoint& pt) {
  return json{{"C", pt.C}, {"zeta", to_json(pt.zeta)}, {"z", to_json(pt.z)}, {"alpha", to_json(pt.alpha)},
              {"xi", to_json(pt.xi)}};
}

inline bho::BhoPoint point_from_json(const json& j, const bho::BhoInstance& I) {
  bho::BhoPoint pt;
  pt.C = as_double(require(j, "C"), "C");
  pt.zeta = vector_from_json(require(j, "zeta"), "zeta");
  pt.z = vector_from_json(require(j, "z"), "z");
  pt.alpha = vector_from_json(require(j, "alpha"), "alpha");
  pt.xi = vector_from_json(require(j, "xi"), "xi");
  if (pt.zeta.size() != I.T * I.m1 || pt.z.size() != I.T * I.m1 || pt.alpha.size() != I.T * I.m2 ||
      pt.xi.size() != I.T * I.m2)
    throw ParseError("point: component lengths do not match the instance");
  return pt;
}

inline json to_json(const bho::FoldSplit& fs) {
  return json{{"T", fs.T},
              {"m1", fs.m1},
              {"m2", fs.m2},
              {"seed", fs.seed},
              {"validation_indices", fs.validation_indices},
              {"training_indices", fs.training_indices}};
}

// ---------------------------------------------------------------------------
// Analysis pieces

inline json to_json(const ActivePattern& p) {
  return json{{"I_g", p.I_g}, {"I_G", p.I_G}, {"I_H", p.I_H}, {"I_GH", p.I_GH}};
}

inline json to_json(const FeasibilityReport& r) {
  json v = json::array();
  for (const auto& x : r.violating_constraints)
    v.push_back(json{{"family", x.family}, {"index", x.index}, {"residual", x.residual}});
  return json{{"feasible", r.feasible}, {"max_violation", r.max_violation}, {"violating_constraints", v}};
}

inline std::string tag_label(const RowTag& t) {
  return std::string(t.orientation < 0 ? "-" : "") + family_name(t.family) + "[" + std::to_string(t.index) + "]";
}

inline json to_json(const cq::Certificate& c) {
  struct Visitor {
    json operator()(const std::monostate&) const { return nullptr; }
    json operator()(const numeric::RankResult& r) const {
      return json{{"kind", "rank"},
                  {"rank", r.rank},
                  {"rows", r.rows},
                  {"cols", r.cols},
                  {"singular_values", json(r.singular_values)}};
    }
    json operator()(const cq::MultiplierCertificate& m) const {
      json rows = json::array();
      for (const auto& t : m.tags) rows.push_back(tag_label(t));
      return json{{"kind", "combination"},
                  {"rows", rows},
                  {"coefficients", to_json(m.witness.coefficients)},
                  {"margin", number_or_null(m.witness.margin)}};
    }
    json operator()(const cq::PartitionFailure& f) const {
      return json{{"kind", "partition"},
                  {"condition", f.condition},
                  {"P", f.P},
                  {"Q", f.Q},
                  {"R", f.R},
                  {"best_margin", number_or_null(f.best_margin)}};
    }
  };
  return std::visit(Visitor{}, c);
}

inline json to_json(const cq::CqVerdict& v) {
  return json{{"status", cq::tri_state_name(v.status)}, {"certificate", to_json(v.certificate)}, {"notes", v.notes}};
}

inline json to_json(const cq::CqReport& r) {
  json verdicts = json::object();
  for (const auto& v : r.verdicts) verdicts[cq::cq_name(v.name)] = to_json(v);
  json viol = json::array();
  for (const auto& x : r.implication_violations)
    viol.push_back(json{{"premise", cq::cq_name(x.premise)},
                        {"conclusion", cq::cq_name(x.conclusion)},
                        {"description", x.description}});
  return json{{"verdicts", verdicts}, {"implication_violations", viol}};
}

inline json to_json(const stationarity::MultiplierVector& w) {
  return json{{"lambda", to_json(w.lambda)}, {"mu", to_json(w.mu)}, {"gamma", to_json(w.gamma)}, {"nu", to_json(w.nu)}};
}

inline json to_json(const stationarity::StationarityVerdict& v) {
  json j{{"strongest_class", stationarity::class_name(v.strongest_class)},
         {"c_undecided", v.c_undecided},
         {"m_undecided", v.m_undecided},
         {"notes", v.notes}};
  j["witness"] = v.witness ? to_json(*v.witness) : json(nullptr);
  return j;
}

inline json to_json(const bho::LambdaPsiPattern& p) {
  return json{{"Lambda1", p.Lambda1},     {"Lambda2", p.Lambda2},   {"Lambda3_plus", p.Lambda3_plus},
              {"Lambda3_c", p.Lambda3_c}, {"Lambda_u", p.Lambda_u}, {"Psi2", p.Psi2},
              {"Psi3", p.Psi3},           {"I_GH3", p.I_GH3},       {"I_GH4", p.I_GH4},
              {"boundary_validation", p.boundary_validation},      {"assumption_flags", p.assumption_flags}};
}

inline json to_json(const bho::LicqTheoremResult& r) {
  json j = to_json(r.verdict);
  j["branch"] = r.branch;
  j["a_hat"] = r.a_hat ? number_or_null(*r.a_hat) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Stable digests for reproduction messages

inline std::string fnv_digest(const std::vector<const Matrix*>& mats, const std::vector<double>& extra = {}) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](double x) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  for (const Matrix* m : mats) {
    feed(static_cast<double>(m->rows()));
    feed(static_cast<double>(m->cols()));
    for (Index j = 0; j < m->cols(); ++j)
      for (Index i = 0; i < m->rows(); ++i) feed((*m)(i, j));
  }
  for (double x : extra) feed(x);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string digest(const PointEvaluation& e) {
  return fnv_digest({&e.g_grads, &e.h_grads, &e.G_grads, &e.H_grads});
}

inline std::string point_digest(const PointEvaluation& e) {
  std::vector<double> vals;
  for (const Vector* v : {&e.point, &e.g_vals, &e.h_vals, &e.G_vals, &e.H_vals}) {
    vals.push_back(static_cast<double>(v->size()));
    vals.insert(vals.end(), v->data(), v->data() + v->size());
  }
  return fnv_digest({}, vals);
}

inline std::string digest(const bho::BhoInstance& I) { return fnv_digest({&I.A, &I.B}); }

inline std::string digest(const bho::BhoPoint& pt) {
  const Vector v = pt.stacked();
  return fnv_digest({}, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace mpeccq::io
