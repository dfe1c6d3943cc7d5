#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "microclust/combinatorics.hpp"
#include "microclust/enumerate.hpp"
#include "microclust/experiment.hpp"
#include "microclust/partition.hpp"
#include "microclust/partition_io.hpp"

using namespace microclust;

TEST_CASE("labels are canonicalized by first appearance") {
  const Partition p = Partition::from_canonical_or_raw({7, 3, 7, 9, 3});
  CHECK(std::vector<std::uint32_t>(p.labels().begin(), p.labels().end()) == std::vector<std::uint32_t>{1, 2, 1, 3, 2});
  CHECK(p.num_parts() == 3);
  CHECK(p.sorted_sizes() == std::vector<std::size_t>{1, 2, 2});
  CHECK(p == partition_from_labels(std::vector<std::string>{"x", "y", "x", "z", "y"}));
}

TEST_CASE("size profile") {
  const std::vector<std::size_t> sizes{2, 1, 3, 1};
  const SizeProfile prof = partition_from_sizes(sizes).profile();
  CHECK(prof.n == 7);
  CHECK(prof.num_parts == 4);
  CHECK(prof.counts == std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {2, 1}, {3, 1}});
  const std::vector<std::size_t> bad{2, 0};
  CHECK_THROWS_AS(partition_from_sizes(bad), std::invalid_argument);
}

TEST_CASE("statistics of the builtin simulated partition") {
  const Partition p = generate_simulated_partition();
  CHECK(p.size() == 5000);
  CHECK(p.num_parts() == 4500);
  const PartitionStats s = compute_statistics(p);
  CHECK(s.singletons == 4100);
  CHECK(s.max_size == 3);
  CHECK(s.mean_size == doctest::Approx(5000.0 / 4500.0));
  // rank ceil(0.9 * 4500) = 4050 <= 4100 singletons
  CHECK(s.q90 == 1);
}

TEST_CASE("nearest-rank quantile") {
  const std::vector<std::size_t> v{1, 1, 2, 3, 5, 8, 13, 21, 34, 55};
  CHECK(nearest_rank_quantile(v, 0.9) == 34);
  CHECK(nearest_rank_quantile(v, 0.91) == 55);
  CHECK(nearest_rank_quantile(v, 0.1) == 1);
  CHECK(nearest_rank_quantile(v, 1.0) == 55);
  CHECK_THROWS(compute_statistics(Partition{}));
}

TEST_CASE("trivial partitions") {
  CHECK(all_in_one(4).num_parts() == 1);
  CHECK(all_singletons(4).num_parts() == 4);
}

TEST_CASE("enumerator visits Bell(n) distinct partitions") {
  for (std::size_t n = 0; n <= 9; ++n) {
    std::set<std::vector<std::uint32_t>> seen;
    for_each_partition(n, [&](const Partition &p) {
      CHECK(p.size() == n);
      seen.emplace(p.labels().begin(), p.labels().end());
    });
    CHECK(seen.size() == bell_number(static_cast<unsigned>(n)));
  }
  CHECK(enumerate_partitions(8).size() == 4140);
  CHECK_THROWS_AS(PartitionEnumerator(13), std::length_error);
}

TEST_CASE("enumerated partitions are canonical") {
  for (const Partition &p : enumerate_partitions(6))
    CHECK(Partition::from_canonical_or_raw(std::vector<std::uint32_t>(p.labels().begin(), p.labels().end())) == p);
}

TEST_CASE("sizes format") {
  std::istringstream in("1\n1\n2\n");
  const Partition p = read_partition(in);
  CHECK(p.size() == 4);
  CHECK(p.sorted_sizes() == std::vector<std::size_t>{1, 1, 2});
}

TEST_CASE("membership format with header and comments") {
  std::istringstream in("element_id,cluster_label\n# note\n\na,7\nb,3\nc,7\n");
  const Partition p = read_partition(in);
  CHECK(p.size() == 3);
  CHECK(p.label(0) == p.label(2));
  CHECK(p.label(0) != p.label(1));
}

TEST_CASE("membership round trip of the simulated partition") {
  const Partition p = generate_simulated_partition();
  std::stringstream buf;
  write_membership(buf, p);
  CHECK(read_partition(buf) == p);

  std::stringstream sizes;
  write_sizes(sizes, p);
  CHECK(read_partition(sizes).profile() == p.profile());

  const auto path = std::filesystem::temp_directory_path() / "microclust_roundtrip.txt";
  write_membership(path, p);
  CHECK(read_partition(path) == p);
  std::filesystem::remove(path);
}

TEST_CASE("duplicate element id is named") {
  std::istringstream in("e1,1\ne2,1\ne1,2\n");
  try {
    read_partition(in);
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find("e1") != std::string::npos);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("malformed rows report their line") {
  std::istringstream zero("2\n0\n");
  CHECK_THROWS_AS(read_partition(zero), ParseError);
  std::istringstream junk("# c\n3\nabc\n");
  try {
    read_partition(junk);
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.line() == 3);
  }
  std::istringstream mixed("a,1\n4\n");
  CHECK_THROWS_AS(read_partition(mixed), ParseError);
  CHECK_THROWS(read_partition(std::filesystem::path("/nonexistent/partition.txt")));
}
