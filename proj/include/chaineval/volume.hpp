#pragma once

#include "chaineval/error.hpp"

#include <json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chaineval {

/// Dense label volume, row-major over (H, W, D): idx = (h * W + w) * D + d.
struct LabelVolume {
    std::array<std::size_t, 3> dims{0, 0, 0};  // H, W, D
    std::vector<std::uint16_t> voxels;
    std::optional<std::array<double, 3>> spacing;  // mm

    static LabelVolume zeros(std::size_t h, std::size_t w, std::size_t d);

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t index(std::size_t h, std::size_t w, std::size_t d) const { return (h * dims[1] + w) * dims[2] + d; }
    std::uint16_t at(std::size_t h, std::size_t w, std::size_t d) const { return voxels[index(h, w, d)]; }
    std::uint16_t& at(std::size_t h, std::size_t w, std::size_t d) { return voxels[index(h, w, d)]; }

    /// Throws Error("HeaderMismatch") when dims are zero or disagree with the voxel count.
    void validate() const;

    friend bool operator==(const LabelVolume&, const LabelVolume&) = default;
};

struct RemapTable {
    std::vector<std::uint16_t> map;          // source label -> merged label
    std::vector<std::string> source_names;   // per source label
    std::vector<std::string> names;          // per merged label

    std::size_t domain_size() const { return map.size(); }
    std::size_t image_size() const { return names.size(); }

    /// Totality over the source domain and surjectivity onto 0..names.size()-1.
    /// Throws Error("InvariantViolation").
    void validate() const;
};

/// The 117 -> 56 organ merge table (sources 0..117, merged 0..56). Checked
/// once on first use.
const RemapTable& builtin_remap_table();

/// Errors: UnknownLabel with {"labels": [{"label", "count"}, ...]}.
LabelVolume remap_volume(const LabelVolume& vol, const RemapTable& table = builtin_remap_table());

/// Normalized name or synonym -> merged label id.
const std::map<std::string, std::uint16_t>& organ_synonyms();

/// Normalization used for organ names: lower case, underscores and
/// punctuation folded to single spaces.
std::string normalize_organ_name(std::string_view name);

/// Case-insensitive lookup through merged names, source names and
/// synonyms. Errors: UnknownOrgan with up to three nearest names.
std::uint16_t match_organ(std::string_view name);

/// Canonical merged name for a label, e.g. 20 -> "colorectum".
const std::string& merged_name(std::uint16_t label);

struct Roi {
    std::uint16_t label = 0;
    std::array<std::size_t, 3> lo{0, 0, 0};  // inclusive
    std::array<std::size_t, 3> hi{0, 0, 0};  // inclusive
    std::size_t voxel_count = 0;

    nlohmann::json to_json() const;
    friend bool operator==(const Roi&, const Roi&) = default;
};

/// Tight bounding box and exact count. Throws Error("EmptyRoi").
Roi extract_roi(const LabelVolume& vol, std::uint16_t label);

/// Binary mask (1 = label) cropped to the ROI box.
LabelVolume crop_mask(const LabelVolume& vol, const Roi& roi);

enum class VoxelType { U8, U16 };

/// Native format: raw little-endian voxels at `path` plus a JSON sidecar at
/// path + ".json" holding {dims, dtype, spacing}. The dtype defaults to the
/// narrowest type that fits. Throws Error("UnsupportedDatatype") when a
/// requested u8 cannot hold the labels.
void write_volume(const LabelVolume& vol, const std::filesystem::path& path,
                  std::optional<VoxelType> dtype = std::nullopt);

/// Reads the native format, or a NIfTI-1 file when the name ends in .nii or
/// .nii.gz. Errors: IoError, HeaderMismatch, UnsupportedDatatype,
/// TruncatedFile.
LabelVolume read_volume(const std::filesystem::path& path);

/// NIfTI-1 single-file subset: datatypes 2 (u8), 4 (i16), 512 (u16), gzip or
/// plain. Data is transposed from i-fastest order to the row-major layout.
LabelVolume read_nifti(const std::filesystem::path& path);

}  // namespace chaineval
