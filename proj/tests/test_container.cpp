#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "bevfuse/container.hpp"

using namespace bevfuse;

namespace {
std::filesystem::path tmpdir() {
  auto p = std::filesystem::temp_directory_path() / "bevfuse_container_test";
  std::filesystem::create_directories(p);
  return p;
}
}

TEST_CASE("f64 round trip is bit exact") {
  auto path = (tmpdir() / "a.ten").string();
  std::vector<double> payload = {1.0, -2.5, 3.25e-300, 7.125e300, 0.1};
  std::vector<uint64_t> dims = {5};
  write_ten_file(path, TenDtype::f64, dims, payload.data());
  TenData t = read_ten_file(path);
  CHECK(t.dtype == TenDtype::f64);
  REQUIRE(t.dims == dims);
  for (size_t i = 0; i < payload.size(); ++i) CHECK(t.f64[i] == payload[i]);
}

TEST_CASE("f32 and u8 round trips") {
  auto p1 = (tmpdir() / "b.ten").string();
  std::vector<float> f = {0.5f, -1.25f, 3e10f};
  std::vector<uint64_t> d1 = {3, 1};
  write_ten_file(p1, TenDtype::f32, d1, f.data());
  TenData t1 = read_ten_file(p1);
  CHECK(t1.f32 == f);
  CHECK(t1.dims == d1);

  auto p2 = (tmpdir() / "c.ten").string();
  std::vector<uint8_t> u = {0, 1, 255, 4};
  std::vector<uint64_t> d2 = {2, 2};
  write_ten_file(p2, TenDtype::u8, d2, u.data());
  TenData t2 = read_ten_file(p2);
  CHECK(t2.u8 == u);
}

TEST_CASE("truncated payload raises CorruptContainer") {
  auto path = (tmpdir() / "trunc.ten").string();
  std::vector<double> payload(16, 1.0);
  std::vector<uint64_t> dims = {16};
  write_ten_file(path, TenDtype::f64, dims, payload.data());
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 9);
  CHECK_THROWS_AS(read_ten_file(path), CorruptContainer);
}

TEST_CASE("bad magic raises CorruptContainer") {
  auto path = (tmpdir() / "magic.ten").string();
  std::ofstream os(path, std::ios::binary);
  os.write("NOPE", 4);
  os.write("\x01\x01", 2);
  os.close();
  CHECK_THROWS_AS(read_ten_file(path), CorruptContainer);
}

TEST_CASE("checkpoint round trip preserves names, order and payloads") {
  auto path = (tmpdir() / "ck.bvck").string();
  std::vector<NamedTensor> entries(2);
  entries[0].name = "enc.w";
  entries[0].data.dtype = TenDtype::f64;
  entries[0].data.dims = {2, 3};
  entries[0].data.f64 = {1, 2, 3, 4, 5, 0.1};
  entries[1].name = "opt/m/enc.w";
  entries[1].data.dtype = TenDtype::f64;
  entries[1].data.dims = {6};
  entries[1].data.f64 = {0, 0, 0.5, 0, 0, 0};
  write_checkpoint(path, entries);
  auto back = read_checkpoint(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "enc.w");
  CHECK(back[1].name == "opt/m/enc.w");
  CHECK(back[0].data.f64 == entries[0].data.f64);
  CHECK(back[1].data.dims == entries[1].data.dims);
}

TEST_CASE("corrupted checkpoint raises CorruptContainer") {
  auto path = (tmpdir() / "ck2.bvck").string();
  std::vector<NamedTensor> entries(1);
  entries[0].name = "w";
  entries[0].data.dtype = TenDtype::f64;
  entries[0].data.dims = {4};
  entries[0].data.f64 = {1, 2, 3, 4};
  write_checkpoint(path, entries);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  CHECK_THROWS_AS(read_checkpoint(path), CorruptContainer);
}
