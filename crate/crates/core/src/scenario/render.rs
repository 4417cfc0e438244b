use crate::error::Result;
use crate::optical_flow::{
    compute_gradients, flow_to_ground_velocity, lucas_kanade_grid, CameraModel, FlowVector, ImageFrame,
    DEFAULT_LK_WINDOW,
};
use crate::texture::GroundTexture;

/// LK windows per image axis when measuring flow from rendered frames.
pub const FLOW_GRID: usize = 5;

/// Nadir view of the ground texture with the camera centre above
/// `(east, north)` metres in the scenario's tangent plane.
pub fn render_frame(east: f64, north: f64, cam: &CameraModel, texture: &GroundTexture, t: f64) -> Result<ImageFrame> {
    cam.validate()?;
    let s = cam.metres_per_pixel();
    let ((xe, xn), (ye, yn)) = cam.axes();
    ImageFrame::from_fn(cam.width, cam.height, t, |u, v| {
        let du = (u as f64 - cam.cx) * s;
        let dv = (v as f64 - cam.cy) * s;
        texture.sample(east + du * xe + dv * ye, north + du * xn + dv * yn)
    })
}

/// Mean LK flow over a grid of windows; `None` when every window is
/// ambiguous or falls outside the image.
pub fn frame_pair_flow(f0: &ImageFrame, f1: &ImageFrame) -> Result<Option<FlowVector>> {
    let g = compute_gradients(f0, f1)?;
    let field = lucas_kanade_grid(&g, FLOW_GRID, DEFAULT_LK_WINDOW)?;
    let valid: Vec<FlowVector> = field.valid().map(|(_, v)| v).collect();
    if valid.is_empty() {
        return Ok(None);
    }
    let n = valid.len() as f64;
    let sum = valid.iter().fold(FlowVector::new(0.0, 0.0), |a, &b| a + b);
    Ok(Some(sum * (1.0 / n)))
}

/// Horizontal ground velocity (east, north) seen between two rendered frames.
pub fn rendered_velocity(
    from: (f64, f64),
    to: (f64, f64),
    cam: &CameraModel,
    texture: &GroundTexture,
    t0: f64,
    t1: f64,
) -> Result<Option<(f64, f64)>> {
    let f0 = render_frame(from.0, from.1, cam, texture, t0)?;
    let f1 = render_frame(to.0, to.1, cam, texture, t1)?;
    match frame_pair_flow(&f0, &f1)? {
        Some(v) => Ok(Some(flow_to_ground_velocity(v, cam, t1 - t0)?)),
        None => Ok(None),
    }
}
