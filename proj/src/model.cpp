#include "cartoon/model.hpp"

namespace cr {

void load_vgg_weights(ModelingNetwork<float>& net, const std::string& path) {
  const WeightArchive ar = WeightArchive::load(path);
  const auto it = ar.meta.find("architecture");
  if (it == ar.meta.end() || it->second != ModelingNetwork<float>::kArchitecture) {
    throw DataError(path + ": not a converted " + std::string(ModelingNetwork<float>::kArchitecture) + " archive");
  }
  load_params(ar, net.parameters());
}

CartoonModel CartoonModel::create(std::uint64_t seed, const std::string& vgg_path, std::uint64_t vgg_seed) {
  CartoonModel m;
  m.modeling = ModelingNetwork<float>::seeded(vgg_seed);
  if (!vgg_path.empty()) load_vgg_weights(m.modeling, vgg_path);
  Rng rng(seed);
  m.coordinator = Coordinator<float>(rng);
  m.renderer = RenderingNetwork<float>(rng);
  return m;
}

ParamList<float> CartoonModel::generator_params() const {
  ParamList<float> out = coordinator.parameters();
  for (auto& p : renderer.parameters()) out.push_back(p);
  return out;
}

ParamList<float> CartoonModel::inference_params() const {
  ParamList<float> out = modeling.parameters();
  for (auto& p : generator_params()) out.push_back(p);
  return out;
}

CartoonModel CartoonModel::from_archive(const WeightArchive& ar) {
  const std::string& arch = ar.meta_at("architecture");
  if (arch != kModelArchitecture) {
    throw DataError("checkpoint architecture '" + arch + "' is not '" + kModelArchitecture + "'");
  }
  CartoonModel m = create(0, "", 0);
  load_params(ar, m.inference_params());
  return m;
}

CartoonModel CartoonModel::load(const std::string& path) { return from_archive(WeightArchive::load(path)); }

}  // namespace cr
