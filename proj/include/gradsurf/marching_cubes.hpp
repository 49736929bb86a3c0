#pragma once

#include "gradsurf/mesh.hpp"
#include "gradsurf/voxel_grid.hpp"

namespace gradsurf {

struct IsoSurfaceConfig {
  double iso_value = 0.0;
};

struct IsoSurface {
  TriangleMesh mesh;
  bool no_surface = false;  // no crossing inside the band; mesh is empty
};

// Marching cubes over cells whose eight corner voxels are all active. Shared
// edge vertices are emitted once; triangles face increasing chi. Output order
// follows cell index and is identical for the serial and parallel paths.
IsoSurface marching_cubes(const VoxelGrid& grid, const IsoSurfaceConfig& cfg = {});
IsoSurface marching_cubes_serial(const VoxelGrid& grid, const IsoSurfaceConfig& cfg = {});

}  // namespace gradsurf
