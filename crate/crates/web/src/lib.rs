//! Browser demo: descriptor views, linear reconstruction and live Nano
//! training on one image pair.

pub mod session;

use wasm_bindgen::prelude::*;

pub use session::{Session, StepReport, SCHEDULE};

fn js_err(e: multinex::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
    last_mse: f64,
    last_loss: f64,
    last_psnr: f64,
}

#[wasm_bindgen]
impl Demo {
    /// A generated `size × size` scene.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u32) -> Result<Demo, JsValue> {
        Session::synthetic(size, seed as u64)
            .and_then(Demo::wrap)
            .map_err(js_err)
    }

    /// RGBA pixels from a canvas, used as the reference.
    #[wasm_bindgen(js_name = fromRgba)]
    pub fn from_rgba(rgba: &[u8], width: usize, height: usize, seed: u32) -> Result<Demo, JsValue> {
        Session::from_rgba(rgba, width, height, seed as u64)
            .and_then(Demo::wrap)
            .map_err(js_err)
    }

    fn wrap(session: Session) -> multinex::Result<Demo> {
        let (_, psnr) = session.enhanced()?;
        Ok(Demo {
            session,
            last_mse: f64::NAN,
            last_loss: f64::NAN,
            last_psnr: psnr,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.session.width()
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.session.height()
    }

    pub fn low(&self) -> Vec<u8> {
        self.session.low_rgba()
    }

    pub fn reference(&self) -> Vec<u8> {
        self.session.reference_rgba()
    }

    /// Comma-separated descriptor names.
    pub fn descriptors(&self) -> String {
        self.session.descriptor_names().join(",")
    }

    pub fn descriptor(&self, name: &str) -> Result<Vec<u8>, JsValue> {
        self.session.descriptor_rgba(name).map_err(js_err)
    }

    /// Stack is `luminance`, `reflectance`, `both` or `all`.
    pub fn lra(&mut self, stack: &str, d: usize, lambda: f64) -> Result<Vec<u8>, JsValue> {
        let (px, mse) = self.session.lra_rgba(stack, d, lambda).map_err(js_err)?;
        self.last_mse = mse;
        Ok(px)
    }

    #[wasm_bindgen(getter, js_name = lraMse)]
    pub fn lra_mse(&self) -> f64 {
        self.last_mse
    }

    pub fn train(&mut self, steps: usize) -> Result<(), JsValue> {
        let r = self.session.train(steps).map_err(js_err)?;
        self.last_loss = r.loss;
        self.last_psnr = r.psnr;
        Ok(())
    }

    pub fn enhanced(&self) -> Result<Vec<u8>, JsValue> {
        let (out, _) = self.session.enhanced().map_err(js_err)?;
        Ok(multinex::io::to_rgba8(&out))
    }

    #[wasm_bindgen(getter)]
    pub fn iteration(&self) -> usize {
        self.session.iteration()
    }

    #[wasm_bindgen(getter)]
    pub fn schedule(&self) -> usize {
        SCHEDULE
    }

    #[wasm_bindgen(getter)]
    pub fn loss(&self) -> f64 {
        self.last_loss
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.last_psnr
    }
}
