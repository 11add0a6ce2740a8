/* tslint:disable */
/* eslint-disable */

/**
 * Rows `z, m^{-n}Z_n(z), W_n·gaussian, second-order prediction` for one
 * branching walk run to `generations`, with limits read off that generation.
 */
export function brw_profile(sigma: number, offspring: Float64Array, generations: number, seed: number): Float64Array;

/**
 * Rows `n, c2, theorem candidate, corollary candidate` for step counts
 * doubling from 8 up to `n_max`, shifted onto the parity of `z`.
 */
export function coefficient_sequence(sigma: number, z: number, n_max: number): Float64Array;

/**
 * Rows `z, exact, expansion, gaussian` for the lazy walk after `n` steps.
 */
export function llt_profile(sigma: number, n: number): Float64Array;

export function version(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly brw_profile: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly coefficient_sequence: (a: number, b: number, c: number) => [number, number, number, number];
    readonly llt_profile: (a: number, b: number) => [number, number, number, number];
    readonly version: () => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
