/// Axis-aligned box in center form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// Axis-aligned box in corner form, `x0 <= x1`, `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corners {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn corners(&self) -> Corners {
        Corners {
            x0: self.cx - self.w / 2.0,
            y0: self.cy - self.h / 2.0,
            x1: self.cx + self.w / 2.0,
            y1: self.cy + self.h / 2.0,
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self::new(self.cx * sx, self.cy * sy, self.w * sx, self.h * sy)
    }
}

impl Corners {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn to_bbox(&self) -> BBox {
        BBox {
            cx: (self.x0 + self.x1) / 2.0,
            cy: (self.y0 + self.y1) / 2.0,
            w: self.x1 - self.x0,
            h: self.y1 - self.y0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn clamp(&self, width: f64, height: f64) -> Self {
        Self {
            x0: self.x0.clamp(0.0, width),
            y0: self.y0.clamp(0.0, height),
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
        }
    }
}

/// Intersection over union of two boxes; 0 when they are disjoint or the
/// union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    iou_corners(&a.corners(), &b.corners())
}

pub fn iou_corners(a: &Corners, b: &Corners) -> f64 {
    let iw = a.x1.min(b.x1) - a.x0.max(b.x0);
    let ih = a.y1.min(b.y1) - a.y0.max(b.y0);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}
