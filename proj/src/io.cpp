#include "micromorph/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

namespace micromorph::io
{

std::string number(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void CsvTable::add(std::vector<std::string> row)
{
  if (row.size() != header.size())
    throw Error("csv row has " + std::to_string(row.size()) + " cells, header has " +
                std::to_string(header.size()));
  rows.push_back(std::move(row));
}

namespace
{

std::ofstream open(const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write " + path);
  return out;
}

void write_row(std::ofstream& out, const std::vector<std::string>& cells)
{
  for (std::size_t i = 0; i < cells.size(); ++i)
    out << (i ? "," : "") << cells[i];
  out << '\n';
}

} // namespace

void write_csv(const std::string& path, const CsvTable& table)
{
  auto out = open(path);
  write_row(out, table.header);
  for (const auto& r : table.rows)
    write_row(out, r);
}

void write_json(const std::string& path, const Json& j)
{
  auto out = open(path);
  out << j.dump(2) << '\n';
}

void write_vtk(const std::string& path, const geometry::Mesh& mesh, const fespace::FieldU* u,
               const fespace::FieldP* p)
{
  auto out = open(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "micromorph fields on " << mesh.domain().name() << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& v : mesh.vertices())
    out << number(v[0]) << ' ' << number(v[1]) << ' ' << number(v[2]) << '\n';
  const int nt = mesh.num_tets();
  out << "CELLS " << nt << ' ' << 5 * nt << '\n';
  for (const auto& t : mesh.tets())
    out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (int t = 0; t < nt; ++t)
    out << "10\n";

  if (u)
  {
    out << "POINT_DATA " << mesh.num_vertices() << '\n';
    out << "VECTORS u double\n";
    for (int v = 0; v < mesh.num_vertices(); ++v)
      out << number(u->coeffs[3 * v]) << ' ' << number(u->coeffs[3 * v + 1]) << ' '
          << number(u->coeffs[3 * v + 2]) << '\n';
  }
  if (p)
  {
    out << "CELL_DATA " << nt << '\n';
    auto tensor = [&](const char* name, auto&& value) {
      out << "TENSORS " << name << " double\n";
      for (int t = 0; t < nt; ++t)
      {
        const Mat3 m = value(t);
        for (int i = 0; i < 3; ++i)
          out << number(m(i, 0)) << ' ' << number(m(i, 1)) << ' ' << number(m(i, 2)) << '\n';
      }
    };
    const std::array<double, 4> centroid{0.25, 0.25, 0.25, 0.25};
    tensor("P", [&](int t) { return fespace::p_in_cell(*p, t, centroid); });
    tensor("CurlP", [&](int t) { return fespace::curlp_in_cell(*p, t); });
  }
}

void ensure_directory(const std::string& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error("cannot create output directory " + dir + (ec ? ": " + ec.message() : ""));
}

} // namespace micromorph::io
