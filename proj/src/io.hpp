#pragma once

#include <filesystem>

#include "invert.hpp"
#include "json.hpp"
#include "maps.hpp"
#include "spectral.hpp"

namespace eit {

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& name);

// doubles round-trip exactly (max_digits10), so identical inputs give
// byte-identical files
std::string format_double(double x);

nlohmann::json grid_json(const StaggeredGrid& grid);
std::string grid_csv(const StaggeredGrid& grid);  // index,r,rhat (rhat blank past the dual end)

nlohmann::json network_json(const ResistorNetwork& net);
ResistorNetwork network_from_json(const nlohmann::json& j);

std::string matrix_csv(const Eigen::MatrixXd& m);  // dense, row-major
Eigen::MatrixXd matrix_from_csv(const std::string& text);

nlohmann::json spectral_json(const SpectralData& data);  // array of {delta, xi}
std::string layered_csv(const LayeredReconstruction& rec);  // zeta,sigma breakpoint table

nlohmann::json measurement_provenance(const MeasuredDtn& md);

nlohmann::json map_json(const MobiusMap& map);
MobiusMap map_from_json(const nlohmann::json& j);
std::string correspondence_csv(const BoundaryCorrespondence& bc);  // k,theta_k,tau_k

nlohmann::json reconstruction_json(const ReconstructionResult& rec);
std::string reconstruction_csv(const ReconstructionResult& rec);  // r,theta,value

std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

// Output bundle: writes files under a root directory and accumulates the
// manifest (relative path -> sha256) emitted at the end of a run.
class OutputBundle {
 public:
  explicit OutputBundle(std::filesystem::path root);
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& j);
  nlohmann::json manifest() const;  // {version, files: {name: sha256}}
  void finalize();                  // writes manifest.json (itself unlisted)
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> checksums_;
};

}  // namespace eit
