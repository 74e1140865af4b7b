/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of one block search, flattened for JavaScript.
 */
export class BlockResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `x, y, width, height` per leaf, block-relative.
     */
    leaves(): Uint32Array;
    /**
     * Indented tree listing, one node per line.
     */
    tree_text(): string;
    readonly cost: number;
    readonly evaluated_nodes: number;
    readonly psnr: number;
    readonly rate: number;
}

/**
 * Trained stage-1 network and classifiers loaded from their files.
 */
export class LoadedPipeline {
    free(): void;
    [Symbol.dispose](): void;
    constructor(weights: Uint8Array, bank: Uint8Array);
    /**
     * Top-N pruned search driven by the loaded models.
     */
    partition(luma: Uint8Array, width: number, height: number, bx: number, by: number, qp: number, topn: string): BlockResult;
}

/**
 * Space-separated legal split names for a `width x height` CU.
 */
export function legal_split_names(width: number, height: number, mtt_ancestor: boolean): string;

/**
 * Exhaustive RD search of block `(bx, by)` (in 64-pixel units).
 */
export function partition_exhaustive(luma: Uint8Array, width: number, height: number, bx: number, by: number, qp: number): BlockResult;

/**
 * Top-N pruned search with a model-free predictor: `uniform`, or
 * `random` seeded by `seed`.
 */
export function partition_pruned(luma: Uint8Array, width: number, height: number, bx: number, by: number, qp: number, topn: string, predictor: string, seed: number): BlockResult;

/**
 * Grayscale test image, row-major.
 */
export function synthetic_image(seed: number, width: number, height: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_blockresult_free: (a: number, b: number) => void;
    readonly __wbg_loadedpipeline_free: (a: number, b: number) => void;
    readonly blockresult_cost: (a: number) => number;
    readonly blockresult_evaluated_nodes: (a: number) => number;
    readonly blockresult_leaves: (a: number) => [number, number];
    readonly blockresult_psnr: (a: number) => number;
    readonly blockresult_rate: (a: number) => number;
    readonly blockresult_tree_text: (a: number) => [number, number];
    readonly legal_split_names: (a: number, b: number, c: number) => [number, number, number, number];
    readonly loadedpipeline_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly loadedpipeline_partition: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
    readonly partition_exhaustive: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly partition_pruned: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number, l: number) => [number, number, number];
    readonly synthetic_image: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
