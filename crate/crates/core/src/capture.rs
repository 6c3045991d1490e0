//! The simulated eye-in-hand camera: render a pose, remove the table and keep
//! the primary object mask.

use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::renderer::{add_depth_noise, render, Intrinsics, RgbdFrame, SceneSpec};
use crate::segmenter::{primary_mask, ObjectMask, PlaneModel, SegmentationConfig};
use crate::viewsphere::{CameraPose, SphereError, ViewSphere};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels (square pixels, centred principal point).
    pub focal: f64,
    /// Standard deviation of additive depth noise in mm; 0 disables it.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            focal: 120.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::centered(self.width, self.height, self.focal)
    }
}

/// One captured view: the frame, the fitted table plane (when found) and the
/// largest object mask (empty when segmentation found nothing).
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub view: Option<usize>,
    pub pose: CameraPose,
    pub frame: RgbdFrame,
    pub plane: Option<PlaneModel>,
    pub mask: ObjectMask,
}

impl Capture {
    pub fn has_object(&self) -> bool {
        !self.mask.is_empty()
    }
}

/// Render `scene` from `pose`, add seeded noise and segment.
pub fn capture_pose(
    scene: &SceneSpec,
    pose: &CameraPose,
    camera: &CameraConfig,
    segmentation: &SegmentationConfig,
    noise_seed: u64,
) -> Capture {
    let mut frame = render(scene, pose, &camera.intrinsics(), camera.width, camera.height);
    add_depth_noise(&mut frame, camera.noise_sigma, noise_seed);
    let (plane, mask) = match segmentation.segment(&frame) {
        Ok((plane, masks)) => {
            let mask = primary_mask(&masks)
                .cloned()
                .unwrap_or_else(|_| ObjectMask::empty(frame.width, frame.height));
            (Some(plane), mask)
        }
        Err(_) => (None, ObjectMask::empty(frame.width, frame.height)),
    };
    Capture {
        view: None,
        pose: *pose,
        frame,
        plane,
        mask,
    }
}

/// Capture from viewpoint `index`, looking at the scene focus. The noise
/// stream depends only on the camera seed and the index.
pub fn capture_view(
    scene: &SceneSpec,
    sphere: &ViewSphere,
    index: usize,
    camera: &CameraConfig,
    segmentation: &SegmentationConfig,
) -> Result<Capture, SphereError> {
    let pose = sphere.camera_pose_for(index, scene.focus())?;
    let mut c = capture_pose(scene, &pose, camera, segmentation, view_noise_seed(camera, index));
    c.view = Some(index);
    Ok(c)
}

pub fn view_noise_seed(camera: &CameraConfig, index: usize) -> u64 {
    derive_seed(camera.noise_seed, index as u64)
}
