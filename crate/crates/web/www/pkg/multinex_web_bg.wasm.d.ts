/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_descriptor: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_descriptors: (a: number) => [number, number];
export const demo_enhanced: (a: number) => [number, number, number, number];
export const demo_fromRgba: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const demo_height: (a: number) => number;
export const demo_iteration: (a: number) => number;
export const demo_loss: (a: number) => number;
export const demo_low: (a: number) => [number, number];
export const demo_lra: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_lraMse: (a: number) => number;
export const demo_new: (a: number, b: number) => [number, number, number];
export const demo_psnr: (a: number) => number;
export const demo_reference: (a: number) => [number, number];
export const demo_schedule: (a: number) => number;
export const demo_train: (a: number, b: number) => [number, number];
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
