#include "fcnet/image_io.hpp"

#include "fcnet/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>

namespace fcnet {
namespace {

cv::Mat to_mat(const RgbImage& image)
{
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

cv::Mat to_mat(const GrayImage& image)
{
    return cv::Mat(image.height, image.width, CV_8UC1, const_cast<std::uint8_t*>(image.data.data())).clone();
}

cv::Mat to_mat(const LabelMap& labels)
{
    const auto max_id = labels.ids.empty() ? 0 : *std::max_element(labels.ids.begin(), labels.ids.end());
    const auto min_id = labels.ids.empty() ? 0 : *std::min_element(labels.ids.begin(), labels.ids.end());
    if (min_id < 0 || max_id > 65535) {
        throw InvalidArgument("label ids must lie in [0,65535] to be stored as PNG");
    }
    const int type = max_id > 255 ? CV_16UC1 : CV_8UC1;
    cv::Mat mat(labels.height, labels.width, type);
    for (int y = 0; y < labels.height; ++y) {
        for (int x = 0; x < labels.width; ++x) {
            if (type == CV_8UC1) {
                mat.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(labels.at(y, x));
            } else {
                mat.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(labels.at(y, x));
            }
        }
    }
    return mat;
}

RgbImage from_mat_rgb(const cv::Mat& input)
{
    cv::Mat bgr;
    if (input.channels() == 1) {
        cv::cvtColor(input, bgr, cv::COLOR_GRAY2BGR);
    } else if (input.channels() == 4) {
        cv::cvtColor(input, bgr, cv::COLOR_BGRA2BGR);
    } else {
        bgr = input;
    }
    if (bgr.depth() != CV_8U) {
        bgr.convertTo(bgr, CV_8U, 1.0 / 257.0);
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    RgbImage out(rgb.rows, rgb.cols);
    for (int y = 0; y < rgb.rows; ++y) {
        std::copy_n(rgb.ptr<std::uint8_t>(y), rgb.cols * 3, out.data.data() + static_cast<std::size_t>(y) * rgb.cols * 3);
    }
    return out;
}

GrayImage from_mat_gray(const cv::Mat& input)
{
    cv::Mat gray;
    if (input.channels() == 3) {
        cv::cvtColor(input, gray, cv::COLOR_BGR2GRAY);
    } else if (input.channels() == 4) {
        cv::cvtColor(input, gray, cv::COLOR_BGRA2GRAY);
    } else {
        gray = input;
    }
    if (gray.depth() != CV_8U) {
        gray.convertTo(gray, CV_8U, 1.0 / 257.0);
    }
    GrayImage out{gray.rows, gray.cols, std::vector<std::uint8_t>(static_cast<std::size_t>(gray.rows) * gray.cols)};
    for (int y = 0; y < gray.rows; ++y) {
        std::copy_n(gray.ptr<std::uint8_t>(y), gray.cols, out.data.data() + static_cast<std::size_t>(y) * gray.cols);
    }
    return out;
}

LabelMap from_mat_labels(const cv::Mat& input)
{
    if (input.channels() != 1) {
        throw InvalidArgument("label maps must be single-channel images");
    }
    LabelMap out{input.rows, input.cols, std::vector<std::int32_t>(static_cast<std::size_t>(input.rows) * input.cols)};
    for (int y = 0; y < input.rows; ++y) {
        for (int x = 0; x < input.cols; ++x) {
            const auto i = static_cast<std::size_t>(y) * input.cols + x;
            switch (input.depth()) {
            case CV_8U: out.ids[i] = input.at<std::uint8_t>(y, x); break;
            case CV_16U: out.ids[i] = input.at<std::uint16_t>(y, x); break;
            default: throw InvalidArgument("label maps must be 8- or 16-bit unsigned");
            }
        }
    }
    return out;
}

cv::Mat read_mat(const std::filesystem::path& path, int flags)
{
    cv::Mat mat = cv::imread(path.string(), flags);
    if (mat.empty()) {
        throw IoError("cannot read image '" + path.string() + "'");
    }
    return mat;
}

cv::Mat decode_mat(std::span<const std::uint8_t> bytes, int flags)
{
    if (bytes.empty()) {
        throw InvalidArgument("empty image payload");
    }
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat mat = cv::imdecode(buffer, flags);
    if (mat.empty()) {
        throw InvalidArgument("image payload could not be decoded");
    }
    return mat;
}

void write_mat(const std::filesystem::path& path, const cv::Mat& mat)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw IoError("cannot write image '" + path.string() + "'");
    }
}

std::vector<std::uint8_t> encode_mat(const cv::Mat& mat)
{
    std::vector<std::uint8_t> bytes;
    if (!cv::imencode(".png", mat, bytes)) {
        throw IoError("PNG encoding failed");
    }
    return bytes;
}

} // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) { return from_mat_rgb(read_mat(path, cv::IMREAD_UNCHANGED)); }
GrayImage read_gray_png(const std::filesystem::path& path) { return from_mat_gray(read_mat(path, cv::IMREAD_UNCHANGED)); }
LabelMap read_label_png(const std::filesystem::path& path) { return from_mat_labels(read_mat(path, cv::IMREAD_UNCHANGED)); }

void write_png(const std::filesystem::path& path, const RgbImage& image) { write_mat(path, to_mat(image)); }
void write_png(const std::filesystem::path& path, const GrayImage& image) { write_mat(path, to_mat(image)); }
void write_png(const std::filesystem::path& path, const LabelMap& labels) { write_mat(path, to_mat(labels)); }

std::vector<std::uint8_t> encode_png(const RgbImage& image) { return encode_mat(to_mat(image)); }
std::vector<std::uint8_t> encode_png(const GrayImage& image) { return encode_mat(to_mat(image)); }
std::vector<std::uint8_t> encode_png(const LabelMap& labels) { return encode_mat(to_mat(labels)); }

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) { return from_mat_rgb(decode_mat(bytes, cv::IMREAD_UNCHANGED)); }
GrayImage decode_gray(std::span<const std::uint8_t> bytes) { return from_mat_gray(decode_mat(bytes, cv::IMREAD_UNCHANGED)); }
LabelMap decode_labels(std::span<const std::uint8_t> bytes) { return from_mat_labels(decode_mat(bytes, cv::IMREAD_UNCHANGED)); }

RgbImage resize_area(const RgbImage& image, int height, int width)
{
    if (image.height == height && image.width == width) {
        return image;
    }
    cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_AREA);
    RgbImage out(height, width);
    for (int y = 0; y < height; ++y) {
        std::copy_n(dst.ptr<std::uint8_t>(y), width * 3, out.data.data() + static_cast<std::size_t>(y) * width * 3);
    }
    return out;
}

GrayImage resize_area(const GrayImage& image, int height, int width)
{
    if (image.height == height && image.width == width) {
        return image;
    }
    cv::Mat dst;
    cv::resize(to_mat(image), dst, cv::Size(width, height), 0, 0, cv::INTER_AREA);
    return from_mat_gray(dst);
}

LabelMap resize_nearest(const LabelMap& labels, int height, int width)
{
    if (labels.height == height && labels.width == width) {
        return labels;
    }
    LabelMap out{height, width, std::vector<std::int32_t>(static_cast<std::size_t>(height) * width)};
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(labels.height - 1, static_cast<int>((y + 0.5) * labels.height / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(labels.width - 1, static_cast<int>((x + 0.5) * labels.width / width));
            out.ids[static_cast<std::size_t>(y) * width + x] = labels.at(sy, sx);
        }
    }
    return out;
}

} // namespace fcnet
