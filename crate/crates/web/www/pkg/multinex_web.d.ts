/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    descriptor(name: string): Uint8Array;
    /**
     * Comma-separated descriptor names.
     */
    descriptors(): string;
    enhanced(): Uint8Array;
    /**
     * RGBA pixels from a canvas, used as the reference.
     */
    static fromRgba(rgba: Uint8Array, width: number, height: number, seed: number): Demo;
    low(): Uint8Array;
    /**
     * Stack is `luminance`, `reflectance`, `both` or `all`.
     */
    lra(stack: string, d: number, lambda: number): Uint8Array;
    /**
     * A generated `size × size` scene.
     */
    constructor(size: number, seed: number);
    reference(): Uint8Array;
    train(steps: number): void;
    readonly height: number;
    readonly iteration: number;
    readonly loss: number;
    readonly lraMse: number;
    readonly psnr: number;
    readonly schedule: number;
    readonly width: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_descriptor: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_descriptors: (a: number) => [number, number];
    readonly demo_enhanced: (a: number) => [number, number, number, number];
    readonly demo_fromRgba: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_height: (a: number) => number;
    readonly demo_iteration: (a: number) => number;
    readonly demo_loss: (a: number) => number;
    readonly demo_low: (a: number) => [number, number];
    readonly demo_lra: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_lraMse: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_psnr: (a: number) => number;
    readonly demo_reference: (a: number) => [number, number];
    readonly demo_schedule: (a: number) => number;
    readonly demo_train: (a: number, b: number) => [number, number];
    readonly demo_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
