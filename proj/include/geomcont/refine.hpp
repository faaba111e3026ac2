#pragma once

#include "geomcont/mesh.hpp"

namespace geomcont {

enum class RefineStrategy {
  RGB,          // red/green/blue with closure cascades, no hanging nodes
  LongestEdge,  // bisect longest edges of the selected triangles only,
                // plus the minimal neighbor bisections for conformity
};

struct RefineResult {
  SurfaceMesh mesh;
  SpMat P;  // np_new x np_old interpolation; midpoint rows are (1/2, 1/2)
};

/// keep_boundary prevents bisection of boundary edges (needed when periodic
/// identifications must survive adaptation).
RefineResult refine(const SurfaceMesh& m, const std::vector<int>& elems,
                    RefineStrategy strategy = RefineStrategy::RGB,
                    bool keep_boundary = false);

struct CoarsenResult {
  SurfaceMesh mesh;
  SpMat R;  // np_new x np_old restriction (selection of kept vertices)
  int merged_groups = 0;
};

/// Inverse of refine: replaces complete sibling sets by their parents.
/// Partial sets are completed; sets whose removal would leave hanging nodes
/// are dropped. Requests naming root triangles are ignored.
CoarsenResult coarsen(const SurfaceMesh& m, const std::vector<int>& elems);

/// Carry a per-vertex field through an interpolation/restriction map.
Vec apply_map(const SpMat& P, const Vec& f);

}  // namespace geomcont
