// Session state and the pure logic behind the editor. Every number stored
// here came from a server response; the UI only converts units for display.

import {
    ApiClient,
    ClipDetail,
    ClipEditResponse,
    ClipSummary,
    CurveShape,
    MetricInfo,
    PoseEditResponse,
    TargetSpec,
} from './api.js';

export function radToDeg(rad: number): number {
    return (rad * 180) / Math.PI;
}

export function degToRad(deg: number): number {
    return (deg * Math.PI) / 180;
}

/** Server-measured metric values for one frame; sliders are seeded from these. */
export function sliderSeeds(
    clip: ClipDetail,
    metricNames: string[],
    frame: number
): Record<string, number> {
    const seeds: Record<string, number> = {};
    for (const name of metricNames) {
        const series = clip.metrics[name];
        const value = series ? series[frame] : null;
        if (value !== null && value !== undefined) {
            seeds[name] = value;
        }
    }
    return seeds;
}

/** Frames inside the weight-curve window [peak - radius, peak + radius]. */
export function changedFrameMask(frameCount: number, peak: number, radius: number): boolean[] {
    const mask = new Array<boolean>(frameCount);
    for (let t = 0; t < frameCount; t++) {
        mask[t] = Math.abs(t - peak) <= radius;
    }
    return mask;
}

/**
 * Per-frame difference intensity between the served edited frames and the
 * curve window: zero outside the window by construction, mean per-joint
 * displacement (meters) inside it.
 */
export function differenceStrip(
    original: number[][],
    edited: number[][],
    mask: boolean[]
): number[] {
    const strip = new Array<number>(original.length).fill(0);
    for (let t = 0; t < original.length; t++) {
        if (!mask[t]) continue;
        const a = original[t];
        const b = edited[t];
        let total = 0;
        for (let j = 0; j < a.length; j += 3) {
            const dx = a[j] - b[j];
            const dy = a[j + 1] - b[j + 1];
            const dz = a[j + 2] - b[j + 2];
            total += Math.sqrt(dx * dx + dy * dy + dz * dz);
        }
        strip[t] = total / (a.length / 3);
    }
    return strip;
}

export interface ExportedClip {
    id: string;
    frame_rate: number;
    frames: number[][];
}

export function exportClipJson(edit: ClipEditResponse): string {
    const doc: ExportedClip = {
        id: edit.id,
        frame_rate: edit.frame_rate,
        frames: edit.frames,
    };
    return JSON.stringify(doc);
}

export function importClipJson(text: string): ExportedClip {
    const doc = JSON.parse(text) as ExportedClip;
    if (!Array.isArray(doc.frames) || typeof doc.frame_rate !== 'number') {
        throw new Error('not an exported clip file');
    }
    return doc;
}

/**
 * Latest-wins request gate: at most one request per channel is in flight;
 * while busy, only the most recent submission is kept and sent afterwards.
 */
export class LatestWins {
    private inFlight = false;
    private pending: (() => Promise<void>) | null = null;

    async submit(task: () => Promise<void>): Promise<void> {
        if (this.inFlight) {
            this.pending = task;
            return;
        }
        this.inFlight = true;
        try {
            await task();
        } finally {
            this.inFlight = false;
        }
        if (this.pending) {
            const next = this.pending;
            this.pending = null;
            await this.submit(next);
        }
    }

    get busy(): boolean {
        return this.inFlight;
    }
}

export interface SessionState {
    clips: ClipSummary[];
    metrics: MetricInfo[];
    clipId: string | null;
    clip: ClipDetail | null;
    playhead: number;
    sliders: Record<string, number>; // radians, server-seeded
    dirty: Set<string>; // sliders moved since last seed
    radius: number;
    shape: CurveShape;
    lastPoseEdit: PoseEditResponse | null;
    lastClipEdit: ClipEditResponse | null;
    lastClipEditPeak: number;
    lastClipEditRadius: number;
    playing: boolean;
    playFrame: number;
    error: string | null;
}

export class EditorSession {
    state: SessionState = {
        clips: [],
        metrics: [],
        clipId: null,
        clip: null,
        playhead: 0,
        sliders: {},
        dirty: new Set(),
        radius: 3,
        shape: 'hat',
        lastPoseEdit: null,
        lastClipEdit: null,
        lastClipEditPeak: 0,
        lastClipEditRadius: 3,
        playing: false,
        playFrame: 0,
        error: null,
    };
    readonly poseGate = new LatestWins();
    private listeners: Array<() => void> = [];

    constructor(private readonly api: ApiClient) {}

    onChange(listener: () => void): void {
        this.listeners.push(listener);
    }

    private emit(): void {
        for (const l of this.listeners) l();
    }

    trainedMetricNames(): string[] {
        return this.state.metrics.filter((m) => m.trained).map((m) => m.name);
    }

    async start(): Promise<void> {
        this.state.metrics = await this.api.metrics();
        this.state.clips = await this.api.clips();
        this.emit();
    }

    async selectClip(id: string): Promise<void> {
        try {
            const clip = await this.api.clip(id);
            this.state.clip = clip;
            this.state.clipId = id;
            this.state.playhead = 0;
            this.state.lastPoseEdit = null;
            this.state.lastClipEdit = null;
            this.state.error = null;
            this.reseedSliders();
        } catch (e) {
            this.state.error = e instanceof Error ? e.message : String(e);
        }
        this.emit();
    }

    /** Seed sliders with the server-measured values at the playhead. */
    reseedSliders(): void {
        if (!this.state.clip) return;
        this.state.sliders = sliderSeeds(
            this.state.clip,
            this.trainedMetricNames(),
            this.state.playhead
        );
        this.state.dirty = new Set();
        this.state.lastPoseEdit = null;
    }

    setPlayhead(frame: number): void {
        if (!this.state.clip) return;
        const max = this.state.clip.frames.length - 1;
        this.state.playhead = Math.max(0, Math.min(max, Math.round(frame)));
        this.reseedSliders();
        this.emit();
    }

    setSlider(name: string, radians: number): void {
        this.state.sliders[name] = radians;
        this.state.dirty.add(name);
        this.emit();
    }

    setRadius(radius: number): void {
        this.state.radius = Math.max(1, Math.round(radius));
        this.emit();
    }

    setShape(shape: CurveShape): void {
        this.state.shape = shape;
        this.emit();
    }

    targets(): TargetSpec[] {
        return [...this.state.dirty].sort().map((name) => ({
            metric: name,
            value: this.state.sliders[name],
        }));
    }

    /** POST /api/edit/pose for the playhead frame (latest-wins gated). */
    async previewPose(): Promise<void> {
        const clip = this.state.clip;
        const targets = this.targets();
        if (!clip || targets.length === 0) return;
        const pose = clip.frames[this.state.playhead];
        await this.poseGate.submit(async () => {
            try {
                this.state.lastPoseEdit = await this.api.editPose(pose, targets);
                this.state.error = null;
            } catch (e) {
                this.state.error = e instanceof Error ? e.message : String(e);
            }
            this.emit();
        });
    }

    /** POST /api/edit/clip with peak = playhead and the chosen curve. */
    async applyToClip(): Promise<void> {
        const clip = this.state.clip;
        const targets = this.targets();
        if (!clip || targets.length === 0) return;
        try {
            this.state.lastClipEdit = await this.api.editClip(
                clip.id,
                this.state.playhead,
                this.state.radius,
                this.state.shape,
                targets
            );
            this.state.lastClipEditPeak = this.state.playhead;
            this.state.lastClipEditRadius = this.state.radius;
            this.state.error = null;
        } catch (e) {
            this.state.error = e instanceof Error ? e.message : String(e);
        }
        this.emit();
    }

    /** Server-measured per-frame series of the trained metrics, for the
     * metric chart; no value in here is computed locally. */
    metricChartSeries(): Record<string, (number | null)[]> {
        const clip = this.state.clip;
        if (!clip) return {};
        const series: Record<string, (number | null)[]> = {};
        for (const name of this.trainedMetricNames()) {
            if (clip.metrics[name]) series[name] = clip.metrics[name];
        }
        return series;
    }

    /** Frames marked as changed by the last clip edit: the curve window. */
    changedFrames(): boolean[] {
        const clip = this.state.clip;
        if (!clip || !this.state.lastClipEdit) return [];
        return changedFrameMask(
            clip.frames.length,
            this.state.lastClipEditPeak,
            this.state.lastClipEditRadius
        );
    }

    togglePlayback(): boolean {
        this.state.playing = !this.state.playing;
        this.emit();
        return this.state.playing;
    }

    /** Advance side-by-side playback by one frame; no-op while paused. */
    tickPlayback(): number {
        const clip = this.state.clip;
        if (!this.state.playing || !clip) return this.state.playFrame;
        this.state.playFrame = (this.state.playFrame + 1) % clip.frames.length;
        return this.state.playFrame;
    }

    exportEditedClip(): string | null {
        if (!this.state.lastClipEdit) return null;
        return exportClipJson(this.state.lastClipEdit);
    }
}
