#pragma once

#include <stdexcept>
#include <string>

namespace mpmcd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MPMCD_DEFINE_ERROR(Name)                 \
  class Name : public Error {                    \
   public:                                       \
    explicit Name(const std::string& what)       \
        : Error(std::string(#Name ": ") + what) {} \
  }

// sim-core
MPMCD_DEFINE_ERROR(NonInvertibleF);
MPMCD_DEFINE_ERROR(SimulationDiverged);
MPMCD_DEFINE_ERROR(OutOfDomain);
// autodiff
MPMCD_DEFINE_ERROR(ShapeMismatch);
// environment
MPMCD_DEFINE_ERROR(PlacementCollision);
MPMCD_DEFINE_ERROR(EmptyRobot);
// design
MPMCD_DEFINE_ERROR(SizeMismatch);
MPMCD_DEFINE_ERROR(UnmappedParticle);
MPMCD_DEFINE_ERROR(DegenerateWeights);
MPMCD_DEFINE_ERROR(DegenerateMean);
MPMCD_DEFINE_ERROR(NonConvergence);
MPMCD_DEFINE_ERROR(EmptyCluster);
MPMCD_DEFINE_ERROR(MeshError);
// tasks
MPMCD_DEFINE_ERROR(CoincidentMarkers);
MPMCD_DEFINE_ERROR(SingularSystem);
// optimize
MPMCD_DEFINE_ERROR(NonFiniteGradient);
MPMCD_DEFINE_ERROR(AllRunsFailed);
// cli
MPMCD_DEFINE_ERROR(ConfigError);

#undef MPMCD_DEFINE_ERROR

}  // namespace mpmcd
