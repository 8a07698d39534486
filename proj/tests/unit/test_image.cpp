#include <doctest.h>

#include <cmath>

#include "lenstrace/image.hpp"
#include "support.hpp"

using namespace lenstrace;

TEST_CASE("png round trip") {
    testsupport::TempDir dir;
    Image img = testsupport::random_image(7, 9, 3, 11);
    SUBCASE("8 bit quantizes to 1/255") {
        write_png(img, dir / "a.png", 8);
        Image back = read_png(dir / "a.png");
        REQUIRE(back.same_shape(img));
        for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255 + 1e-12);
        write_png(back, dir / "b.png", 8);
        CHECK(read_png(dir / "b.png") == back);
    }
    SUBCASE("16 bit quantizes to 1/65535") {
        write_png(img, dir / "a.png", 16);
        Image back = read_png(dir / "a.png");
        for (std::size_t i = 0; i < img.data.size(); ++i)
            CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 65535 + 1e-12);
    }
    SUBCASE("gray") {
        Image g = testsupport::random_image(5, 4, 1, 3);
        write_png(g, dir / "g.png", 16);
        CHECK(read_png(dir / "g.png").channels == 1);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(read_png(dir / "missing.png"), ImageError);
        CHECK_THROWS_AS(write_png(Image(2, 2, 2), dir / "x.png"), ImageError);
        CHECK_THROWS_AS(write_png(img, dir / "x.png", 12), ImageError);
    }
}

TEST_CASE("float planar dump round trip") {
    testsupport::TempDir dir;
    Image img = testsupport::random_image(6, 5, 3, 2, 0.0, 4.0);
    write_float_planar(img, dir / "e.ltfp");
    Image back = read_float_planar(dir / "e.ltfp");
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == static_cast<double>(static_cast<float>(img.data[i])));
}

TEST_CASE("resize and cover crop") {
    Image flat(40, 60, 3, 0.25);
    Image small = resize(flat, 13, 17);
    CHECK(small.height == 13);
    CHECK(small.width == 17);
    for (double v : small.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    Image cover = resize_cover(flat, 30, 30);
    CHECK(cover.height == 30);
    CHECK(cover.width == 30);

    // A horizontal ramp stays centered after cover-crop.
    Image ramp(20, 40, 1);
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 40; ++c) ramp.at(r, c, 0) = c / 39.0;
    Image cropped = resize_cover(ramp, 20, 20);
    CHECK(cropped.at(10, 0, 0) == doctest::Approx(10 / 39.0));
    CHECK(cropped.at(10, 19, 0) == doctest::Approx(29 / 39.0));
    CHECK_THROWS_AS(crop(ramp, 0, 30, 5, 20), ImageError);
}
