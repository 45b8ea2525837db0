#include "io.hpp"

#include <openssl/sha.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace eit {

namespace {

nlohmann::json point_json(const ReconstructionPoint& p) {
  return {{"r", p.r}, {"theta", p.theta}, {"value", p.value}};
}

}  // namespace

std::string topology_name(Topology t) {
  switch (t) {
    case Topology::Circular: return "circular";
    case Topology::Pyramidal: return "pyramidal";
    case Topology::TwoSided: return "two-sided";
  }
  throw std::invalid_argument("unknown topology");
}

Topology topology_from_name(const std::string& name) {
  if (name == "circular") return Topology::Circular;
  if (name == "pyramidal") return Topology::Pyramidal;
  if (name == "two-sided") return Topology::TwoSided;
  throw std::invalid_argument("unknown topology: " + name);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json grid_json(const StaggeredGrid& grid) {
  return {{"n", grid.n},
          {"l", grid.ell},
          {"hbar", grid.hbar},
          {"primary_radii", grid.primary_radii},
          {"dual_radii", grid.dual_radii}};
}

std::string grid_csv(const StaggeredGrid& grid) {
  std::string out = "index,r,rhat\n";
  for (size_t i = 0; i < grid.primary_radii.size(); ++i) {
    out += std::to_string(i) + "," + format_double(grid.primary_radii[i]) + ",";
    if (i < grid.dual_radii.size()) out += format_double(grid.dual_radii[i]);
    out += "\n";
  }
  return out;
}

nlohmann::json network_json(const ResistorNetwork& net) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [a, b] : net.graph.node_coords) nodes.push_back({a, b});
  nlohmann::json edges = nlohmann::json::array();
  for (size_t e = 0; e < net.graph.edges.size(); ++e)
    edges.push_back({{"i", net.graph.edges[e].i},
                     {"j", net.graph.edges[e].j},
                     {"gamma", net.gamma[e]}});
  return {{"topology", topology_name(net.graph.topology)},
          {"n", net.graph.n},
          {"nodes", nodes},
          {"edges", edges}};
}

ResistorNetwork network_from_json(const nlohmann::json& j) {
  const Topology topology = topology_from_name(j.at("topology").get<std::string>());
  const int n = j.at("n").get<int>();
  ResistorNetwork net;
  switch (topology) {
    case Topology::Circular: net.graph = build_circular(n, circular_hbar(n)); break;
    case Topology::Pyramidal: net.graph = build_pyramidal(n); break;
    case Topology::TwoSided: net.graph = build_two_sided(n); break;
  }
  const auto& edges = j.at("edges");
  if (edges.size() != net.graph.edges.size())
    throw std::invalid_argument("edge count does not match the topology");
  net.gamma.assign(net.graph.edges.size(), 0.0);
  for (const auto& e : edges) {
    const int a = e.at("i").get<int>(), b = e.at("j").get<int>();
    size_t k = 0;
    for (; k < net.graph.edges.size(); ++k) {
      const Edge& ge = net.graph.edges[k];
      if ((ge.i == a && ge.j == b) || (ge.i == b && ge.j == a)) break;
    }
    if (k == net.graph.edges.size())
      throw std::invalid_argument("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") is not in the graph");
    net.gamma[k] = e.at("gamma").get<double>();
  }
  for (double g : net.gamma)
    if (!(g > 0.0)) throw std::invalid_argument("conductances must be positive");
  return net;
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ",";
      out += format_double(m(i, j));
    }
    out += "\n";
  }
  return out;
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      size_t used = 0;
      row.push_back(std::stod(cell, &used));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("ragged CSV matrix");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty CSV matrix");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

nlohmann::json spectral_json(const SpectralData& data) {
  nlohmann::json out = nlohmann::json::array();
  for (int j = 0; j < data.ell(); ++j)
    out.push_back({{"delta", data.delta[j]}, {"xi", data.xi[j]}});
  return out;
}

std::string layered_csv(const LayeredReconstruction& rec) {
  std::string out = "zeta,sigma\n";
  const auto& bp = rec.field.breakpoints;
  const auto& v = rec.field.values;
  for (size_t i = 0; i < v.size(); ++i)
    out += format_double(bp[i]) + "," + format_double(v[i]) + "\n";
  out += format_double(bp.back()) + "," + format_double(v.back()) + "\n";
  return out;
}

nlohmann::json measurement_provenance(const MeasuredDtn& md) {
  return {{"n", md.n},
          {"nr", md.nr},
          {"ntheta", md.ntheta},
          {"electrodes", md.shape == ElectrodeShape::Box ? "box" : "bandlimited"},
          {"asymmetry", md.asymmetry}};
}

nlohmann::json map_json(const MobiusMap& map) {
  return {{"a_re", map.a.real()}, {"a_im", map.a.imag()}, {"omega", map.omega}};
}

MobiusMap map_from_json(const nlohmann::json& j) {
  MobiusMap map;
  map.a = {j.at("a_re").get<double>(), j.at("a_im").get<double>()};
  map.omega = j.at("omega").get<double>();
  if (!(std::abs(map.a) < 1.0)) throw std::invalid_argument("|a| must be below 1");
  return map;
}

std::string correspondence_csv(const BoundaryCorrespondence& bc) {
  std::string out = "k,theta_k,tau_k\n";
  for (size_t k = 0; k < bc.theta.size(); ++k)
    out += std::to_string(k + 1) + "," + format_double(bc.theta[k]) + "," +
           format_double(bc.tau[k]) + "\n";
  return out;
}

nlohmann::json reconstruction_json(const ReconstructionResult& rec) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : rec.points) points.push_back(point_json(p));
  std::vector<double> gamma_ref(rec.gamma_ref.begin(), rec.gamma_ref.end());
  return {{"topology", topology_name(rec.recovered.network.graph.topology)},
          {"n", rec.recovered.network.graph.n},
          {"gamma", rec.recovered.network.gamma},
          {"gamma_ref", gamma_ref},
          {"refit_residual", rec.recovered.refit_residual},
          {"iterations", rec.recovered.iterations},
          {"points", points}};
}

std::string reconstruction_csv(const ReconstructionResult& rec) {
  std::string out = "r,theta,value\n";
  for (const auto& p : rec.points)
    out += format_double(p.r) + "," + format_double(p.theta) + "," + format_double(p.value) +
           "\n";
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::string out;
  for (unsigned char c : digest) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", c);
    out += buf;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

OutputBundle::OutputBundle(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

void OutputBundle::write(const std::string& name, const std::string& content) {
  std::ofstream out(root_ / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (root_ / name).string());
  out << content;
  checksums_[name] = sha256_hex(content);
}

void OutputBundle::write_json(const std::string& name, const nlohmann::json& j) {
  write(name, j.dump(2) + "\n");
}

nlohmann::json OutputBundle::manifest() const {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, sum] : checksums_) files[name] = sum;
  return {{"format_version", 1}, {"checksum", "sha256"}, {"files", files}};
}

void OutputBundle::finalize() {
  std::ofstream out(root_ / "manifest.json", std::ios::binary);
  out << manifest().dump(2) << "\n";
}

}  // namespace eit
