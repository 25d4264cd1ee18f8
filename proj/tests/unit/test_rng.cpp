#include "catch_amalgamated.hpp"

#include <set>

#include "vehid/rng.hpp"

using namespace vehid;

TEST_CASE("identical descriptors give identical draws")
{
    const RngStream a{42, 7};
    Engine e1 = a.engine();
    Engine e2 = RngStream{42, 7}.engine();
    for (int i = 0; i < 100; ++i) CHECK(e1() == e2());
}

TEST_CASE("distinct seeds and streams diverge")
{
    CHECK(RngStream{1, 0}.engine()() != RngStream{2, 0}.engine()());
    CHECK(RngStream{1, 0}.engine()() != RngStream{1, 1}.engine()());
}

TEST_CASE("children and named streams are distinct and stable")
{
    const RngStream root{9, 0};
    std::set<std::uint64_t> ids;
    for (std::uint64_t k = 0; k < 1000; ++k) ids.insert(root.child(k).stream_id);
    CHECK(ids.size() == 1000);
    CHECK(root.child(3) == root.child(3));
    CHECK(root.named("pilot") == root.named("pilot"));
    CHECK(root.named("pilot") != root.named("abc"));
    CHECK(root.named("pilot").seed == 9);
}

TEST_CASE("zero-width gaussian returns the mean without consuming")
{
    Engine a = RngStream{3, 3}.engine();
    Engine b = RngStream{3, 3}.engine();
    CHECK(gaussian(a, 1.5, 0.0) == 1.5);
    CHECK(a() == b());
}
