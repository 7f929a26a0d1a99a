#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "decompdual/model.hpp"
#include "decompdual/structure.hpp"

namespace decompdual {

namespace detail {
inline void rejectUnknown(const nlohmann::json& obj,
                          std::initializer_list<const char*> allowed,
                          const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= it.key() == a;
    if (!ok)
      throw std::runtime_error("unknown field '" + it.key() + "' in " + where);
  }
}

inline std::vector<std::pair<int, double>> readSparse(const nlohmann::json& arr,
                                                      const std::string& where) {
  std::vector<std::pair<int, double>> out;
  for (const auto& entry : arr) {
    if (!entry.is_array() || entry.size() != 2)
      throw std::runtime_error("expected [index, coefficient] pairs in " + where);
    out.emplace_back(entry[0].get<int>(), entry[1].get<double>());
  }
  return out;
}
}  // namespace detail

inline Instance instance_from_json(const nlohmann::json& j) {
  detail::rejectUnknown(j, {"blocks", "edges", "meta"}, "instance");
  Instance inst;
  for (const auto& jb : j.at("blocks")) {
    detail::rejectUnknown(jb, {"id", "nBin", "nCont", "c", "d", "rows"}, "block");
    Block b;
    b.id = jb.at("id").get<int>();
    b.nBin = jb.at("nBin").get<int>();
    b.nCont = jb.at("nCont").get<int>();
    b.c = jb.at("c").get<std::vector<double>>();
    b.d = jb.at("d").get<std::vector<double>>();
    for (const auto& jr : jb.at("rows")) {
      detail::rejectUnknown(jr, {"ax", "ay", "rhs"}, "row");
      Block::Row r;
      r.ax = detail::readSparse(jr.at("ax"), "row.ax");
      if (jr.contains("ay")) r.ay = detail::readSparse(jr.at("ay"), "row.ay");
      r.rhs = jr.at("rhs").get<double>();
      b.rows.push_back(std::move(r));
    }
    inst.blocks.push_back(std::move(b));
  }
  if (j.contains("edges")) {
    for (const auto& je : j.at("edges")) {
      detail::rejectUnknown(je, {"a", "b", "pairs"}, "edge");
      CouplingEdge e;
      e.blockA = je.at("a").get<int>();
      e.blockB = je.at("b").get<int>();
      for (const auto& jp : je.at("pairs")) {
        if (!jp.is_array() || jp.size() != 3)
          throw std::runtime_error("edge pair must be [localA, localB, globalId]");
        e.pairs.push_back({jp[0].get<int>(), jp[1].get<int>(),
                           jp[2].get<std::int64_t>()});
      }
      inst.edges.push_back(std::move(e));
    }
  }
  if (j.contains("meta")) {
    detail::rejectUnknown(j.at("meta"), {"type"}, "meta");
    std::string t = j.at("meta").value("type", "general");
    if (t == "packing")
      inst.meta = InstanceTag::Packing;
    else if (t == "covering")
      inst.meta = InstanceTag::Covering;
    else if (t == "general")
      inst.meta = InstanceTag::General;
    else
      throw std::runtime_error("meta.type must be packing|covering|general");
  }
  canonicalize(inst);
  return inst;
}

inline nlohmann::ordered_json instance_to_json(const Instance& inst) {
  nlohmann::ordered_json j;
  j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : inst.blocks) {
    nlohmann::ordered_json jb;
    jb["id"] = b.id;
    jb["nBin"] = b.nBin;
    jb["nCont"] = b.nCont;
    jb["c"] = b.c;
    jb["d"] = b.d;
    jb["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : b.rows) {
      nlohmann::ordered_json jr;
      jr["ax"] = nlohmann::ordered_json::array();
      for (auto [idx, v] : r.ax) jr["ax"].push_back({idx, v});
      jr["ay"] = nlohmann::ordered_json::array();
      for (auto [idx, v] : r.ay) jr["ay"].push_back({idx, v});
      jr["rhs"] = r.rhs;
      jb["rows"].push_back(std::move(jr));
    }
    j["blocks"].push_back(std::move(jb));
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : inst.edges) {
    nlohmann::ordered_json je;
    je["a"] = e.blockA;
    je["b"] = e.blockB;
    je["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : e.pairs)
      je["pairs"].push_back({p.localA, p.localB, p.globalId});
    j["edges"].push_back(std::move(je));
  }
  if (inst.meta != InstanceTag::None) {
    const char* t = inst.meta == InstanceTag::Packing    ? "packing"
                    : inst.meta == InstanceTag::Covering ? "covering"
                                                         : "general";
    j["meta"] = {{"type", t}};
  }
  return j;
}

// Flat MIPs reuse the instance row schema with a single block plus a kinds
// array giving the original variable order: the i-th "binary" entry is the
// block's x_i, the i-th "continuous" entry its y_i.
inline FlatMIP flat_from_json(const nlohmann::json& j) {
  detail::rejectUnknown(j, {"blocks", "kinds"}, "flat MIP");
  FlatMIP m;
  std::vector<int> binFlat, contFlat;
  for (const auto& ks : j.at("kinds")) {
    std::string s = ks.get<std::string>();
    if (s == "binary") {
      binFlat.push_back(m.nVars());
      m.kinds.push_back(VarKind::Binary);
    } else if (s == "continuous") {
      contFlat.push_back(m.nVars());
      m.kinds.push_back(VarKind::Continuous);
    } else {
      throw std::runtime_error("kinds entries must be binary|continuous");
    }
  }
  if (!j.at("blocks").is_array() || j.at("blocks").size() != 1)
    throw std::runtime_error("flat MIP carries exactly one block");
  const auto& jb = j.at("blocks")[0];
  detail::rejectUnknown(jb, {"id", "nBin", "nCont", "c", "d", "rows"}, "block");
  if (jb.at("nBin").get<int>() != static_cast<int>(binFlat.size()) ||
      jb.at("nCont").get<int>() != static_cast<int>(contFlat.size()))
    throw std::runtime_error("kinds array disagrees with block sizes");
  m.c.assign(m.nVars(), 0.0);
  auto cv = jb.at("c").get<std::vector<double>>();
  auto dv = jb.at("d").get<std::vector<double>>();
  for (std::size_t i = 0; i < cv.size(); ++i) m.c[binFlat[i]] = cv[i];
  for (std::size_t i = 0; i < dv.size(); ++i) m.c[contFlat[i]] = dv[i];
  for (const auto& jr : jb.at("rows")) {
    detail::rejectUnknown(jr, {"ax", "ay", "rhs"}, "row");
    FlatRow r;
    for (const auto& e : detail::readSparse(jr.at("ax"), "row.ax"))
      r.a.emplace_back(binFlat.at(e.first), e.second);
    if (jr.contains("ay"))
      for (const auto& e : detail::readSparse(jr.at("ay"), "row.ay"))
        r.a.emplace_back(contFlat.at(e.first), e.second);
    r.rhs = jr.at("rhs").get<double>();
    m.rows.push_back(std::move(r));
  }
  return m;
}

inline nlohmann::ordered_json flat_to_json(const FlatMIP& m) {
  nlohmann::ordered_json j;
  std::map<int, int> binIdx, contIdx;
  nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
  std::vector<double> c, d;
  for (int v = 0; v < m.nVars(); ++v) {
    if (m.kinds[v] == VarKind::Binary) {
      binIdx[v] = static_cast<int>(c.size());
      c.push_back(m.c[v]);
      kinds.push_back("binary");
    } else {
      contIdx[v] = static_cast<int>(d.size());
      d.push_back(m.c[v]);
      kinds.push_back("continuous");
    }
  }
  nlohmann::ordered_json jb;
  jb["id"] = 0;
  jb["nBin"] = static_cast<int>(c.size());
  jb["nCont"] = static_cast<int>(d.size());
  jb["c"] = c;
  jb["d"] = d;
  jb["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : m.rows) {
    nlohmann::ordered_json jr;
    jr["ax"] = nlohmann::ordered_json::array();
    jr["ay"] = nlohmann::ordered_json::array();
    for (auto [v, coef] : r.a) {
      if (m.kinds[v] == VarKind::Binary)
        jr["ax"].push_back({binIdx[v], coef});
      else
        jr["ay"].push_back({contIdx[v], coef});
    }
    jr["rhs"] = r.rhs;
    jb["rows"].push_back(std::move(jr));
  }
  j["blocks"] = nlohmann::ordered_json::array({jb});
  j["kinds"] = kinds;
  return j;
}

inline FlatMIP load_flat(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return flat_from_json(j);
}

inline void save_flat(const FlatMIP& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << flat_to_json(m).dump(2) << "\n";
}

inline Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return instance_from_json(j);
}

inline void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << instance_to_json(inst).dump(2) << "\n";
}

}  // namespace decompdual
