#pragma once

// The generator side of the system: frozen encoder, coordinator and renderer.

#include <string>

#include "cartoon/archive.hpp"
#include "cartoon/coordination.hpp"
#include "cartoon/rendering.hpp"

namespace cr {

inline constexpr const char* kModelArchitecture = "cartoon-renderer/vgg19-prefix-relu4_1";

struct CartoonModel {
  ModelingNetwork<float> modeling;
  Coordinator<float> coordinator;
  RenderingNetwork<float> renderer;

  /// Coordinator and renderer from `seed`; encoder from the converted archive
  /// at `vgg_path`, or seeded from `vgg_seed` when the path is empty.
  static CartoonModel create(std::uint64_t seed, const std::string& vgg_path, std::uint64_t vgg_seed);

  /// Coordinator + renderer (what the generator optimizer updates).
  ParamList<float> generator_params() const;
  /// Encoder + coordinator + renderer.
  ParamList<float> inference_params() const;

  /// Loads modeling/coordinator/renderer tensors from a checkpoint or export.
  /// Throws DataError on a wrong architecture id or missing tensors.
  static CartoonModel from_archive(const WeightArchive& ar);
  static CartoonModel load(const std::string& path);
};

/// Encoder weights from a converted VGG-19 archive (tools/convert_vgg19.py).
void load_vgg_weights(ModelingNetwork<float>& net, const std::string& path);

}  // namespace cr
