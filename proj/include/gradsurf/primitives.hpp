#pragma once

#include "gradsurf/mesh.hpp"

namespace gradsurf {

// Subdivided icosahedron projected onto the sphere. Vertex normals are the
// exact radial directions.
TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions);

// Axis-aligned cube [min, min+size]^3, 8 vertices and 12 outward-facing faces.
TriangleMesh make_cube(const Vec3& min_corner, double size);

// Regular grid in the z = height plane spanning [x0,x1] x [y0,y1], normals +z.
TriangleMesh make_plane(double x0, double y0, double x1, double y1, double height, int cells_x,
                        int cells_y);

// Concatenates meshes, reindexing faces. Normals are kept only if every part has them.
TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts);

}  // namespace gradsurf
