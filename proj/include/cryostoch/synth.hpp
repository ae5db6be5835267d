#pragma once

#include "cryostoch/ctf.hpp"
#include "cryostoch/grid.hpp"
#include "cryostoch/operators.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace cryostoch {

using Quaternion = Eigen::Quaterniond;

/// Positions and radii in voxel units; the grid centre is (N/2, N/2, N/2).
struct Sphere {
    Vec3 center;
    double radius;
    double density = 1.0;
};

struct Cylinder {
    Vec3 start;
    Vec3 end;
    double radius;
    double density = 1.0;
};

struct PhantomSpec {
    int side = 32;
    std::vector<Sphere> spheres;
    std::vector<Cylinder> cylinders;
};

/// Two unequal lobes joined by a thinner stalk.
[[nodiscard]] PhantomSpec default_phantom_spec(int side);

/// Additive rasterization; voxels straddling a boundary get a linear
/// coverage ramp one voxel wide.
[[nodiscard]] VolumeGrid make_phantom(const PhantomSpec& spec);

/// Sum of `n_spheres` unit-density spheres, centres uniform in the central
/// half of the grid, radii uniform in [min_radius, max_radius].
[[nodiscard]] VolumeGrid random_init(int side, int n_spheres, double min_radius, double max_radius,
                                     std::uint64_t seed);

/// Generator for stream `index` of `seed`; streams are independent of the
/// order in which they are created.
[[nodiscard]] std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index);

/// Haar-uniform unit quaternion (normalized 4D Gaussian).
[[nodiscard]] Quaternion uniform_random_quaternion(std::mt19937_64& rng);
[[nodiscard]] Mat3 uniform_random_rotation(std::mt19937_64& rng);
[[nodiscard]] Mat3 rotation_from_quaternion(const Quaternion& q);

/// CTF parameter pool: defoci spread over [10000, 30000] Angstrom at 300 kV.
[[nodiscard]] std::vector<CtfParams> default_ctf_pool();

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct SimulationConfig {
    std::size_t count = 2000;
    double target_snr = 0.2;   ///< kNoNoise disables noise
    std::vector<CtfParams> ctf_pool = default_ctf_pool();
    std::uint64_t seed = 1;
    double pixel_size = 3.0;
    double shift_std = 0.0;    ///< 0: every image is centred
    double shift_radius = 0.0; ///< truncation of the shift distribution

    void validate() const;
};

struct SimulatedDataset {
    std::vector<ParticleImage> images;
    std::vector<ParticleImage> clean;
    std::vector<Quaternion> orientations;
    std::vector<Shift2> shifts;
    std::vector<CtfParams> ctfs;
    double signal_variance = 0.0;
    double sigma = 0.0; ///< noise standard deviation actually used (0 without noise)
};

/// Forward model used for simulation: full-mask central slice of the 2x
/// padded volume transform (8-tap windowed-sinc kernel), shifted, CTF-modulated
/// and inverse transformed.
class ImageRenderer {
public:
    ImageRenderer(const VolumeGrid& v, double pixel_size);
    [[nodiscard]] ParticleImage render(const Mat3& rotation, Shift2 shift, const CtfParams& ctf) const;

private:
    int side_;
    double pixel_size_;
    FrequencyMask mask_;
    FourierVolume transform_;
};

/// Draws a pose and CTF per image, renders clean images, and adds real-space
/// Gaussian noise with variance = mean clean-pixel variance / target_snr.
/// Throws DataError when the clean signal has zero variance.
[[nodiscard]] SimulatedDataset simulate_dataset(const VolumeGrid& v, const SimulationConfig& cfg);

} // namespace cryostoch
