//! PNG export/import of [`ViewMaps`].
//!
//! For a stem `S` the files are `S_color.png` (8-bit RGB), `S_depth.png`
//! (16-bit gray), `S_depth.txt` (the linear quantization range) and
//! `S_mask.png` (8-bit, 0 or 255). Depth code 0 marks invalid pixels; valid
//! depths map linearly from `[near, far]` onto codes `1..=65535`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{Raster, ViewMaps, INVALID_DEPTH};

fn paths(dir: &Path, stem: &str) -> [PathBuf; 4] {
    [
        dir.join(format!("{stem}_color.png")),
        dir.join(format!("{stem}_depth.png")),
        dir.join(format!("{stem}_depth.txt")),
        dir.join(format!("{stem}_mask.png")),
    ]
}

pub fn save_view_maps(maps: &ViewMaps, dir: &Path, stem: &str, near: f64, far: f64) -> Result<()> {
    if !(near < far) {
        return Err(Error::InvalidParameter(format!(
            "depth range [{near}, {far}] is empty"
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [color_p, depth_p, side_p, mask_p] = paths(dir, stem);
    let (w, h) = maps.dims();
    let rgb: Vec<u8> = maps.color.data().iter().flatten().copied().collect();
    RgbImage::from_raw(w as u32, h as u32, rgb)
        .expect("buffer sized from raster")
        .save(&color_p)?;
    let codes: Vec<u16> = maps
        .depth
        .data()
        .iter()
        .zip(maps.valid.data())
        .map(|(&d, &ok)| if ok { quantize(d, near, far) } else { 0 })
        .collect();
    ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w as u32, h as u32, codes)
        .expect("buffer sized from raster")
        .save(&depth_p)?;
    fs::write(&side_p, format!("depth_near {near:?}\ndepth_far {far:?}\n"))
        .map_err(|e| Error::io(&side_p, e))?;
    let mask: Vec<u8> = maps.valid.data().iter().map(|&v| if v { 255 } else { 0 }).collect();
    GrayImage::from_raw(w as u32, h as u32, mask)
        .expect("buffer sized from raster")
        .save(&mask_p)?;
    Ok(())
}

pub fn load_view_maps(dir: &Path, stem: &str) -> Result<ViewMaps> {
    let [color_p, depth_p, side_p, mask_p] = paths(dir, stem);
    let color = image::open(&color_p)?.to_rgb8();
    let depth = image::open(&depth_p)?.to_luma16();
    let mask = image::open(&mask_p)?.to_luma8();
    let side = fs::read_to_string(&side_p).map_err(|e| Error::io(&side_p, e))?;
    let mut near = None;
    let mut far = None;
    for line in side.lines() {
        let mut it = line.split_whitespace();
        let (key, val) = (it.next(), it.next().and_then(|v| v.parse::<f64>().ok()));
        match key {
            Some("depth_near") => near = val,
            Some("depth_far") => far = val,
            _ => {}
        }
    }
    let (near, far) = near
        .zip(far)
        .ok_or_else(|| Error::parse(side_p.display().to_string(), "missing depth range"))?;
    let (w, h) = (color.width() as usize, color.height() as usize);
    let color_r = Raster::from_vec(w, h, color.pixels().map(|p| p.0).collect())?;
    let valid = Raster::from_vec(w, h, mask.pixels().map(|p| p.0[0] > 127).collect())?;
    let depth_r = Raster::from_vec(
        w,
        h,
        depth
            .pixels()
            .zip(valid.data())
            .map(|(p, &ok)| {
                if ok && p.0[0] > 0 {
                    dequantize(p.0[0], near, far)
                } else {
                    INVALID_DEPTH
                }
            })
            .collect(),
    )?;
    let mut maps = ViewMaps::new(color_r, depth_r, valid)?;
    maps.normalize_invalid();
    Ok(maps)
}

fn quantize(d: f64, near: f64, far: f64) -> u16 {
    let t = ((d - near) / (far - near)).clamp(0.0, 1.0);
    1 + (t * 65534.0).round() as u16
}

fn dequantize(code: u16, near: f64, far: f64) -> f64 {
    near + (code as f64 - 1.0) / 65534.0 * (far - near)
}
