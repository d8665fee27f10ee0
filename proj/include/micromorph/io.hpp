#pragma once

#include "micromorph/fespace.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace micromorph::io
{

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form of a double.
std::string number(double v);

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

void write_csv(const std::string& path, const CsvTable& table);
void write_json(const std::string& path, const Json& j);

/// Legacy ASCII VTK unstructured grid, tetrahedra (cell type 10). u as point
/// data, P at cell centroids and Curl P as cell data. Either field may be
/// null. No timestamps, so equal input gives equal bytes.
void write_vtk(const std::string& path, const geometry::Mesh& mesh, const fespace::FieldU* u,
               const fespace::FieldP* p);

/// Creates the directory (and parents). Throws Error on failure.
void ensure_directory(const std::string& dir);

} // namespace micromorph::io
