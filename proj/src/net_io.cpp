#include "rlqr/net_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "rlqr/errors.hpp"

namespace rlqr {

static constexpr const char* kMagic = "rlqr-net";
static constexpr int kVersion = 1;

void save_network(const NetworkParams& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << kMagic << ' ' << kVersion << '\n';
  out << std::setprecision(17);
  out << "output_scale " << net.output_scale << '\n';
  out << "layers " << net.num_layers() << '\n';
  for (const auto& layer : net.layers) {
    out << "layer " << activation_name(layer.act) << ' ' << layer.W.rows()
        << ' ' << layer.W.cols() << '\n';
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.W.cols(); ++j) {
        if (j) out << ' ';
        out << layer.W(i, j);
      }
      out << '\n';
    }
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) {
      if (i) out << ' ';
      out << layer.b(i);
    }
    out << '\n';
  }
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

NetworkParams load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic || version != kVersion)
    throw ConfigError("'" + path + "' is not a version-" +
                      std::to_string(kVersion) + " network checkpoint");
  std::string key;
  NetworkParams net;
  in >> key >> net.output_scale;
  if (key != "output_scale") throw ConfigError("expected output_scale");
  int count = 0;
  in >> key >> count;
  if (key != "layers" || count <= 0) throw ConfigError("expected layer count");
  for (int l = 0; l < count; ++l) {
    std::string act;
    Eigen::Index rows = 0, cols = 0;
    in >> key >> act >> rows >> cols;
    if (key != "layer" || rows <= 0 || cols <= 0)
      throw ConfigError("malformed layer header");
    Layer layer;
    layer.act = activation_from_name(act);
    layer.W.resize(rows, cols);
    layer.b.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) in >> layer.W(i, j);
    for (Eigen::Index i = 0; i < rows; ++i) in >> layer.b(i);
    if (!in) throw ConfigError("truncated checkpoint '" + path + "'");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace rlqr
