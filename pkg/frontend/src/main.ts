// DOM wiring for the studio editor: clip picker, pose viewport with an
// edited-overlay, metric sliders (degrees on screen, radians on the wire),
// weight-curve controls, side-by-side playback and export.

import { ApiClient } from './api.js';
import { EditorSession, degToRad, differenceStrip, radToDeg } from './state.js';
import { DEFAULT_CAMERA, clearCanvas, drawMetricChart, drawSkeleton, drawStrip } from './render.js';

const api = new ApiClient('');
const session = new EditorSession(api);

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as T;
}

const clipSelect = el<HTMLSelectElement>('clip-select');
const frameSlider = el<HTMLInputElement>('frame-slider');
const frameLabel = el<HTMLSpanElement>('frame-label');
const slidersBox = el<HTMLDivElement>('sliders');
const radiusInput = el<HTMLInputElement>('radius');
const shapeSelect = el<HTMLSelectElement>('shape');
const applyButton = el<HTMLButtonElement>('apply');
const exportButton = el<HTMLButtonElement>('export');
const playButton = el<HTMLButtonElement>('play');
const errorBanner = el<HTMLDivElement>('error-banner');
const poseCanvas = el<HTMLCanvasElement>('pose-canvas');
const origCanvas = el<HTMLCanvasElement>('orig-canvas');
const editedCanvas = el<HTMLCanvasElement>('edited-canvas');
const stripCanvas = el<HTMLCanvasElement>('strip-canvas');
const chartCanvas = el<HTMLCanvasElement>('chart-canvas');

function sliderRow(name: string, radians: number): HTMLDivElement {
    const row = document.createElement('div');
    row.className = 'slider-row';
    const label = document.createElement('label');
    label.textContent = name;
    const input = document.createElement('input');
    input.type = 'range';
    input.min = '0';
    input.max = '180';
    input.step = '0.5';
    input.value = String(radToDeg(radians));
    const value = document.createElement('span');
    value.className = 'value';
    value.textContent = `${radToDeg(radians).toFixed(1)}°`;
    input.addEventListener('input', () => {
        value.textContent = `${Number(input.value).toFixed(1)}°`;
        session.setSlider(name, degToRad(Number(input.value)));
    });
    // request on release, not on every pixel of drag
    input.addEventListener('change', () => void session.previewPose());
    row.append(label, input, value);
    row.dataset.metric = name;
    return row;
}

function renderSliders(): void {
    slidersBox.textContent = '';
    for (const name of session.trainedMetricNames()) {
        const seeded = session.state.sliders[name];
        if (seeded === undefined) continue;
        slidersBox.append(sliderRow(name, seeded));
    }
}

function renderReadouts(): void {
    const edit = session.state.lastPoseEdit;
    if (!edit) return;
    for (const readout of edit.readouts) {
        const row = slidersBox.querySelector<HTMLDivElement>(
            `div[data-metric="${readout.name}"]`
        );
        if (row) {
            const value = row.querySelector<HTMLSpanElement>('.value');
            if (value) {
                value.textContent =
                    `${radToDeg(readout.before).toFixed(1)}° → ${radToDeg(readout.after).toFixed(1)}°`;
            }
        }
    }
}

function renderPose(): void {
    const clip = session.state.clip;
    const ctx = poseCanvas.getContext('2d');
    if (!clip || !ctx) return;
    clearCanvas(ctx);
    drawSkeleton(ctx, clip.frames[session.state.playhead], clip.parents, DEFAULT_CAMERA, '#8a93a5');
    const edit = session.state.lastPoseEdit;
    if (edit) {
        drawSkeleton(ctx, edit.pose, clip.parents, DEFAULT_CAMERA, '#ff8c28', 3);
    }
}

function renderComparison(frame: number): void {
    const clip = session.state.clip;
    const edited = session.state.lastClipEdit;
    const octx = origCanvas.getContext('2d');
    const ectx = editedCanvas.getContext('2d');
    if (!clip || !octx || !ectx) return;
    clearCanvas(octx);
    drawSkeleton(octx, clip.frames[frame], clip.parents, DEFAULT_CAMERA, '#8a93a5');
    clearCanvas(ectx);
    if (edited) {
        drawSkeleton(ectx, edited.frames[frame], clip.parents, DEFAULT_CAMERA, '#ff8c28');
    }
}

function renderStrip(): void {
    const clip = session.state.clip;
    const ctx = stripCanvas.getContext('2d');
    if (!clip || !ctx) return;
    const edited = session.state.lastClipEdit;
    if (edited) {
        const mask = session.changedFrames();
        drawStrip(
            ctx,
            differenceStrip(clip.frames, edited.frames, mask),
            session.state.playhead,
            mask
        );
    } else {
        drawStrip(ctx, new Array(clip.frames.length).fill(0), session.state.playhead, null);
    }
}

function renderChart(): void {
    const ctx = chartCanvas.getContext('2d');
    if (!ctx) return;
    drawMetricChart(ctx, session.metricChartSeries(), session.state.playhead);
}

function renderAll(): void {
    errorBanner.textContent = session.state.error ?? '';
    errorBanner.style.display = session.state.error ? 'block' : 'none';
    const clip = session.state.clip;
    if (clip) {
        frameSlider.max = String(clip.frames.length - 1);
        frameSlider.value = String(session.state.playhead);
        frameLabel.textContent = `${session.state.playhead} / ${clip.frames.length - 1}`;
    }
    renderPose();
    renderStrip();
    renderChart();
    renderComparison(
        session.state.playing ? session.state.playFrame : session.state.playhead
    );
    renderReadouts();
}

session.onChange(() => {
    // slider rows are rebuilt only when their seeds were replaced
    if (!slidersBox.hasChildNodes() || session.state.dirty.size === 0) {
        renderSliders();
    }
    renderAll();
});

clipSelect.addEventListener('change', () => void session.selectClip(clipSelect.value));
frameSlider.addEventListener('input', () => session.setPlayhead(Number(frameSlider.value)));
radiusInput.addEventListener('change', () => session.setRadius(Number(radiusInput.value)));
shapeSelect.addEventListener('change', () =>
    session.setShape(shapeSelect.value === 'sine' ? 'sine' : 'hat')
);
applyButton.addEventListener('click', () => void session.applyToClip());

exportButton.addEventListener('click', () => {
    const text = session.exportEditedClip();
    if (!text) return;
    const blob = new Blob([text], { type: 'application/json' });
    const link = document.createElement('a');
    link.href = URL.createObjectURL(blob);
    link.download = `${session.state.clipId ?? 'clip'}-edited.json`;
    link.click();
    URL.revokeObjectURL(link.href);
});

playButton.addEventListener('click', () => {
    playButton.textContent = session.togglePlayback() ? 'Pause' : 'Play';
});

setInterval(() => {
    if (!session.state.playing) return;
    renderComparison(session.tickPlayback());
}, 1000 / 30);

async function boot(): Promise<void> {
    try {
        await session.start();
    } catch (e) {
        errorBanner.textContent = e instanceof Error ? e.message : String(e);
        errorBanner.style.display = 'block';
        return;
    }
    clipSelect.textContent = '';
    for (const clip of session.state.clips) {
        const option = document.createElement('option');
        option.value = clip.id;
        option.textContent = `${clip.id} (${clip.frames} frames)`;
        clipSelect.append(option);
    }
    if (session.state.clips.length > 0) {
        await session.selectClip(session.state.clips[0].id);
    }
}

void boot();
