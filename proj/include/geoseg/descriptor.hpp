#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "geoseg/camera.hpp"
#include "geoseg/detector.hpp"
#include "geoseg/image.hpp"

namespace geoseg {

/// 256-bit binary descriptor of one arc slice. bits_flipped is the descriptor
/// of the mirrored chord (direction reversed); the reversed-orientation
/// alignment in rlbd_distance compares against it, which makes matching
/// invariant to which way a curve was walked in each frame.
struct SliceDescriptor {
  std::array<uint64_t, 4> bits{};
  std::array<uint64_t, 4> bits_flipped{};

  int hamming(const SliceDescriptor& other) const {
    int d = 0;
    for (int i = 0; i < 4; ++i) d += __builtin_popcountll(bits[i] ^ other.bits[i]);
    return d;
  }

  int hamming_flipped(const SliceDescriptor& other) const {
    int d = 0;
    for (int i = 0; i < 4; ++i) d += __builtin_popcountll(bits[i] ^ other.bits_flipped[i]);
    return d;
  }

  bool operator==(const SliceDescriptor& o) const { return bits == o.bits; }
};

/// Ordered slice descriptors along the arc from p_start.
struct RlbdDescriptor {
  std::vector<SliceDescriptor> slices;
  double m_deg = 10.0;
};

struct MatchParams {
  double m_deg = 10.0;            // arc degrees per slice
  double hamming_frac_max = 0.25; // max mean Hamming fraction of a match
  int min_overlap_slices = 2;     // required aligned slices (capped by length)
  bool mutual_check = true;
  double second_gap = 0.03;       // best must beat the runner-up by this; 0 off

  void validate() const {
    if (!(m_deg > 0.0) || !(hamming_frac_max > 0.0 && hamming_frac_max < 1.0) ||
        min_overlap_slices < 1 || second_gap < 0.0)
      raise(Err::InvalidParameter, "bad match parameters");
  }
};

/// Line-band descriptor of one sub-arc, computed on the image chord between
/// the projected slice endpoints: 8 bands of 7 rows aligned to the chord
/// direction and its normal, 9 gradient statistics per band, binarized by a
/// fixed table of 256 seeded index-pair comparisons.
/// Throws SliceOutsideImage when the chord leaves the image.
SliceDescriptor compute_slice_descriptor(const GrayImage& img, const CameraModel& model,
                                         const GeodesicSegment& sub);

/// Slices the segment every m_deg and stacks the surviving slice descriptors
/// in arc order. Slices whose chord leaves the image are skipped; throws
/// SliceOutsideImage when none survive.
RlbdDescriptor compute_rlbd(const GrayImage& img, const CameraModel& model,
                            const CurveSegment& seg, const MatchParams& params);
RlbdDescriptor compute_rlbd(const GrayImage& img, const CameraModel& model,
                            const GeodesicSegment& geo, const MatchParams& params);

/// Distance between descriptors: minimum over slice-sequence alignments
/// (shift of the shorter list along the longer, both orientations) of the
/// mean per-slice Hamming fraction, requiring
/// min(min_overlap_slices, min(len_a, len_b)) aligned slices.
double rlbd_distance(const RlbdDescriptor& a, const RlbdDescriptor& b, const MatchParams& params);

struct DescriptorMatch {
  int index_a = 0;
  int index_b = 0;
  double score = 0.0;  // 1 - distance
};

/// Thresholded (and optionally mutual-nearest-neighbor) matching; output is a
/// partial injection sorted by descending score.
std::vector<DescriptorMatch> match(const std::vector<RlbdDescriptor>& a,
                                   const std::vector<RlbdDescriptor>& b,
                                   const MatchParams& params);

}  // namespace geoseg
