/* tslint:disable */
/* eslint-disable */

/**
 * Amplitude-encodes `values` and describes the preparation circuit.
 */
export function encodeAmplitudes(values: Float64Array): string;

/**
 * Pauli-Z expectations of the encoded state after a random circuit, with
 * every noise probability scaled from 0 to `max_scale`.
 */
export function noiseSweep(values: Float64Array, layers: number, seed: number, max_scale: number, steps: number): string;

/**
 * Histogram of synthetic recovery rates over `[0, 1.1]`.
 */
export function synthHistogram(n_obs: number, n_features: number, seed: number, bins: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly encodeAmplitudes: (a: number, b: number) => [number, number, number, number];
    readonly noiseSweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly synthHistogram: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
