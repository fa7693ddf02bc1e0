#include "gr/realtime.hpp"

#ifdef __linux__
#include <fcntl.h>
#include <linux/videodev2.h>
#include <sys/ioctl.h>
#include <sys/mman.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#endif

namespace gr::realtime {

#ifdef __linux__

namespace {

int xioctl(int fd, unsigned long req, void* arg) {
    int r;
    do {
        r = ::ioctl(fd, req, arg);
    } while (r == -1 && errno == EINTR);
    return r;
}

}  // namespace

struct CameraFrameSource::Impl {
    int fd = -1;
    int width = 0;
    int height = 0;
    void* buffer = nullptr;
    std::size_t buffer_len = 0;
    bool streaming = false;

    ~Impl() {
        if (streaming) {
            v4l2_buf_type type = V4L2_BUF_TYPE_VIDEO_CAPTURE;
            xioctl(fd, VIDIOC_STREAMOFF, &type);
        }
        if (buffer) ::munmap(buffer, buffer_len);
        if (fd >= 0) ::close(fd);
    }
};

CameraFrameSource::CameraFrameSource(int device_index, int width, int height)
    : impl_(std::make_unique<Impl>()) {
    const std::string dev = "/dev/video" + std::to_string(device_index);
    impl_->fd = ::open(dev.c_str(), O_RDWR);
    if (impl_->fd < 0) throw InputError("cannot open camera device " + dev);

    v4l2_format fmt{};
    fmt.type = V4L2_BUF_TYPE_VIDEO_CAPTURE;
    fmt.fmt.pix.width = width;
    fmt.fmt.pix.height = height;
    fmt.fmt.pix.pixelformat = V4L2_PIX_FMT_YUYV;
    fmt.fmt.pix.field = V4L2_FIELD_NONE;
    if (xioctl(impl_->fd, VIDIOC_S_FMT, &fmt) < 0)
        throw InputError(dev + ": camera does not accept YUYV capture format");
    impl_->width = static_cast<int>(fmt.fmt.pix.width);
    impl_->height = static_cast<int>(fmt.fmt.pix.height);

    v4l2_requestbuffers req{};
    req.count = 1;
    req.type = V4L2_BUF_TYPE_VIDEO_CAPTURE;
    req.memory = V4L2_MEMORY_MMAP;
    if (xioctl(impl_->fd, VIDIOC_REQBUFS, &req) < 0 || req.count < 1)
        throw InputError(dev + ": cannot allocate capture buffers");

    v4l2_buffer buf{};
    buf.type = V4L2_BUF_TYPE_VIDEO_CAPTURE;
    buf.memory = V4L2_MEMORY_MMAP;
    buf.index = 0;
    if (xioctl(impl_->fd, VIDIOC_QUERYBUF, &buf) < 0)
        throw InputError(dev + ": buffer query failed");
    impl_->buffer_len = buf.length;
    impl_->buffer =
        ::mmap(nullptr, buf.length, PROT_READ | PROT_WRITE, MAP_SHARED, impl_->fd, buf.m.offset);
    if (impl_->buffer == MAP_FAILED) {
        impl_->buffer = nullptr;
        throw InputError(dev + ": buffer mmap failed");
    }

    if (xioctl(impl_->fd, VIDIOC_QBUF, &buf) < 0) throw InputError(dev + ": queueing failed");
    v4l2_buf_type type = V4L2_BUF_TYPE_VIDEO_CAPTURE;
    if (xioctl(impl_->fd, VIDIOC_STREAMON, &type) < 0)
        throw InputError(dev + ": cannot start streaming");
    impl_->streaming = true;
}

CameraFrameSource::~CameraFrameSource() = default;

std::optional<Frame> CameraFrameSource::next() {
    v4l2_buffer buf{};
    buf.type = V4L2_BUF_TYPE_VIDEO_CAPTURE;
    buf.memory = V4L2_MEMORY_MMAP;
    if (xioctl(impl_->fd, VIDIOC_DQBUF, &buf) < 0) return std::nullopt;

    Frame f;
    f.timestamp_ms = now_ms();
    f.image = GrayImage(impl_->width, impl_->height);
    // luminance is every even byte of the YUYV stream
    const auto* src = static_cast<const std::uint8_t*>(impl_->buffer);
    for (std::size_t i = 0; i < f.image.size(); ++i) f.image.data[i] = src[i * 2];

    if (xioctl(impl_->fd, VIDIOC_QBUF, &buf) < 0) return f;  // deliver the last good frame
    return f;
}

#else

struct CameraFrameSource::Impl {};

CameraFrameSource::CameraFrameSource(int, int, int) {
    throw InputError("camera capture is only available on Linux; use a frame directory");
}

CameraFrameSource::~CameraFrameSource() = default;

std::optional<Frame> CameraFrameSource::next() { return std::nullopt; }

#endif

}  // namespace gr::realtime
