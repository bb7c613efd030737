#ifndef DRS_SPECTRO_HPP
#define DRS_SPECTRO_HPP

#include "drs/rng.hpp"
#include "drs/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace drs {

/// Uniform wavelength grid, inclusive at both ends.
struct WavelengthGrid {
  double lambda_min = 400.0;  // nm
  double lambda_max = 900.0;  // nm
  double spacing = 1.0;       // nm

  int size() const;
  double wavelength(int i) const { return lambda_min + spacing * i; }
  VecX wavelengths() const;
  void validate() const;

  static WavelengthGrid full() { return {400.0, 900.0, 1.0}; }
  static WavelengthGrid analysis() { return {468.0, 720.0, 1.0}; }

  friend bool operator==(const WavelengthGrid&, const WavelengthGrid&) = default;
};

enum class SpectrumRole { Raw, White, Dark, Calibrated };

std::string to_string(SpectrumRole role);
SpectrumRole role_from_string(const std::string& s);

struct Spectrum {
  WavelengthGrid grid;
  VecX values;
  SpectrumRole role = SpectrumRole::Raw;
  std::string id;

  /// Calibrated reflectance outside [-0.1, 1.5] is suspicious but kept.
  bool flagged() const;
};

/// Unit-L2 fingerprint of a calibrated spectrum.
struct Fingerprint {
  VecX values;
  std::string source_id;
};

struct TissueOpticalModel {
  WavelengthGrid grid = WavelengthGrid::full();
  std::map<std::string, VecX> base;  // b(lambda) in (0, 1) per material
  double h0 = 1.5;            // gap decay length, mm
  double compression = 0.08;  // spectral tilt per mm of compression
  double noise_sigma = 2.0;   // additive noise, counts
  double white_level = 1000.0;
  double dark_level = 50.0;

  Spectrum white() const;
  Spectrum dark() const;
  const VecX& reflectance(const std::string& material) const;

  /// Smooth synthetic curves for the four sample materials.
  static TissueOpticalModel standard(const WavelengthGrid& grid = WavelengthGrid::full());
};

/// exp(-(max(h, 0) / h0)^2).
double gap_coupling(double h, double h0);

/// mu_R = mu_D + g(h) distort(b, h) (mu_W - mu_D) + eps.
Spectrum synthesize_raw(const TissueOpticalModel& model, const std::string& material, double h, Rng& rng);

/// (mu_R - mu_D) / (mu_W - mu_D).
Spectrum calibrate(const Spectrum& raw, const Spectrum& white, const Spectrum& dark);

/// Savitzky-Golay smoothing. Near the ends the polynomial is fitted on the
/// truncated window and evaluated at the sample.
Spectrum savgol(const Spectrum& s, int window = 11, int order = 3);

/// Channels with lo <= lambda <= hi.
Spectrum crop(const Spectrum& s, double lo = 468.0, double hi = 720.0);

double intensity(const Spectrum& calibrated);
Fingerprint fingerprint(const Spectrum& calibrated);

struct SpectralPipeline {
  int window = 11;
  int order = 3;
  double crop_lo = 468.0;
  double crop_hi = 720.0;
};

struct SpectrumFeatures {
  double intensity = 0.0;
  Fingerprint fingerprint;
};

/// calibrate -> savgol -> crop -> (intensity, fingerprint).
SpectrumFeatures analyse(const Spectrum& raw, const Spectrum& white, const Spectrum& dark,
                         const SpectralPipeline& pipeline = {});

// Spectrum CSV: header "wavelength_nm,<role>:<id>,...", one row per channel.
// All columns share the grid of the first column.
std::string spectra_to_csv(const std::vector<Spectrum>& spectra);
std::vector<Spectrum> spectra_from_csv(const std::string& text);
void save_spectra(const std::vector<Spectrum>& spectra, const std::filesystem::path& path);
std::vector<Spectrum> load_spectra(const std::filesystem::path& path);

}  // namespace drs

#endif  // DRS_SPECTRO_HPP
